"""
JSON network descriptions: the model, the subsystem dynamics, named
failures and an optional failure set. Node indices are 1-based.

    {
      "nodes": 5,
      "edges": [{"from": 1, "to": 2, "weight": "free"}, ...],
      "dynamics": {"A": [[...]], "B": [[...]], "Gamma": [[...]], "C": [[...]]},
      "sensors": [1],
      "failures": [{"name": "l12", "edges": [[1, 2]]}, {"name": "bus1", "nodes": [1]}],
      "failure_set": ["l12"]
    }

A free edge may carry a ``"nominal"`` value used when simulating with
nominal weights.
"""

from __future__ import annotations

import json
import logging
import typing as t
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from netdiag._levenshtein import closest
from netdiag.errors import DescriptionError, InvalidModelError
from netdiag.netgraph import (
    FREE,
    Edge,
    FailureScenario,
    FailureSet,
    NetworkModel,
    WeightSpec,
    node_failure_to_links,
)
from netdiag.sysmodel import SubsystemDynamics

logger = logging.getLogger(__name__)


class Fixture(Enum):
    EXAMPLE1 = "example1"
    EXAMPLE2 = "example2"
    IEEE9 = "ieee9"


def _require(doc: t.Mapping[str, t.Any], key: str, kind: type | tuple[type, ...]) -> t.Any:
    if key not in doc:
        raise DescriptionError(f"Missing required key {key!r}")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise DescriptionError(f"Key {key!r} has the wrong type ({type(value).__name__})")
    return value


def _is_index(value: t.Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _parse_link(raw: t.Any, name: str) -> Edge:
    if not isinstance(raw, list) or len(raw) != 2 or not all(_is_index(v) for v in raw):
        raise DescriptionError(f"Failure {name!r}: links must be [from, to] pairs, got {raw!r}")
    return (raw[0], raw[1])


def _parse_failed_nodes(raw: list[t.Any], name: str) -> list[int]:
    if not all(_is_index(v) for v in raw):
        raise DescriptionError(f"Failure {name!r}: nodes must be node indices, got {raw!r}")
    return raw


def _parse_edge(raw: t.Any) -> tuple[Edge, WeightSpec, float | None]:
    if not isinstance(raw, dict):
        raise DescriptionError(f"Edge entries must be objects, got {raw!r}")
    edge = (_require(raw, "from", int), _require(raw, "to", int))
    weight = raw.get("weight", "free")
    nominal = raw.get("nominal")
    if weight == "free":
        if nominal is not None and not isinstance(nominal, int | float):
            raise DescriptionError(f"Nominal weight of edge {edge} must be a number")
        return edge, FREE, None if nominal is None else float(nominal)
    if not isinstance(weight, int | float) or isinstance(weight, bool):
        raise DescriptionError(f"Weight of edge {edge} must be a number or 'free', got {weight!r}")
    if nominal is not None:
        raise DescriptionError(f"Edge {edge} has a fixed weight and a nominal value")
    return edge, float(weight), None


@dataclass(frozen=True, eq=False)
class NetworkDescription:
    model: NetworkModel
    dynamics: SubsystemDynamics
    failures: t.Mapping[str, FailureScenario] = field(default_factory=dict)
    failure_set_names: tuple[str, ...] | None = None
    source: str | None = None

    @classmethod
    def from_dict(cls, doc: t.Any, source: str | None = None) -> NetworkDescription:
        try:
            return cls._from_dict(doc, source)
        except DescriptionError as e:
            if source:
                raise DescriptionError(f"{source}: {e}") from e
            raise
        except InvalidModelError as e:
            raise DescriptionError(f"{source or 'description'}: {e}") from e

    @classmethod
    def _from_dict(cls, doc: t.Any, source: str | None) -> NetworkDescription:
        if not isinstance(doc, dict):
            raise DescriptionError("A network description must be a JSON object")

        node_count = _require(doc, "nodes", int)
        edges: list[Edge] = []
        weights: dict[Edge, WeightSpec] = {}
        nominal: dict[Edge, float] = {}
        for raw in _require(doc, "edges", list):
            edge, spec, nom = _parse_edge(raw)
            edges.append(edge)
            weights[edge] = spec
            if nom is not None:
                nominal[edge] = nom

        dyn_doc = _require(doc, "dynamics", dict)
        dynamics = SubsystemDynamics(
            A=_require(dyn_doc, "A", list),
            B=_require(dyn_doc, "B", list),
            Gamma=_require(dyn_doc, "Gamma", list),
            C=_require(dyn_doc, "C", list),
        )

        sensors = _require(doc, "sensors", list)
        if not all(_is_index(s) for s in sensors):
            raise DescriptionError("Sensors must be node indices")
        model = NetworkModel.build(node_count, edges, sensors, weights, nominal)

        failures: dict[str, FailureScenario] = {}
        entries = _require(doc, "failures", list) if "failures" in doc else []
        for raw in entries:
            if not isinstance(raw, dict):
                raise DescriptionError(f"Failure entries must be objects, got {raw!r}")
            name = _require(raw, "name", str)
            if name in failures:
                raise DescriptionError(f"Failure {name!r} is defined twice")
            if "nodes" in raw:
                nodes = _parse_failed_nodes(_require(raw, "nodes", list), name)
                scenario = node_failure_to_links(model, nodes, name=name)
            else:
                links = [_parse_link(e, name) for e in _require(raw, "edges", list)]
                scenario = FailureScenario(frozenset(links), name=name)
                scenario.validate_for(model)
            failures[name] = scenario

        names: tuple[str, ...] | None = None
        if "failure_set" in doc:
            names = tuple(_require(doc, "failure_set", list))
            for n in names:
                if not isinstance(n, str):
                    raise DescriptionError(f"Failure set entries must be names, got {n!r}")
                if n not in failures:
                    raise DescriptionError(f"Failure set references unknown failure {n!r}")

        return cls(model, dynamics, failures, names, source)

    @classmethod
    def load(cls, path: Path | str) -> NetworkDescription:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as e:
            raise DescriptionError(f"Could not read {path}: {e.strerror or e}") from e
        except json.JSONDecodeError as e:
            raise DescriptionError(f"{path} is not valid JSON: {e}") from e
        logger.debug("Loaded network description from %s", path)
        return cls.from_dict(doc, source=str(path))

    @classmethod
    def fixture(cls, fixture: Fixture | str) -> NetworkDescription:
        fixture = Fixture(fixture)
        resource = resources.files("netdiag._data").joinpath(f"{fixture.value}.json")
        doc = json.loads(resource.read_text())
        return cls.from_dict(doc, source=fixture.value)

    @classmethod
    def resolve(cls, value: str) -> NetworkDescription:
        """A bundled fixture name or a path to a description file"""
        if value in {f.value for f in Fixture}:
            return cls.fixture(value)
        return cls.load(value)

    def failure(self, name: str) -> FailureScenario:
        try:
            return self.failures[name]
        except KeyError:
            message = f"Unknown failure {name!r}"
            if suggestion := closest(name, self.failures):
                message += f". Did you mean {suggestion!r}?"
            raise DescriptionError(message) from None

    def failure_set(self, names: t.Sequence[str] | None = None) -> FailureSet:
        names = names or self.failure_set_names
        if not names:
            raise DescriptionError("No failure set given and the description defines none")
        return FailureSet(tuple(self.failure(n) for n in names))

    def with_sensors(self, sensors: t.Iterable[int]) -> NetworkDescription:
        return replace(self, model=self.model.with_sensors(sensors))

    def to_dict(self) -> dict[str, t.Any]:
        edges: list[dict[str, t.Any]] = []
        for edge in self.model.sorted_edges:
            spec = self.model.weight_pattern[edge]
            entry: dict[str, t.Any] = {"from": edge[0], "to": edge[1]}
            if spec is FREE:
                entry["weight"] = "free"
                if edge in self.model.nominal_weights:
                    entry["nominal"] = self.model.nominal_weights[edge]
            else:
                entry["weight"] = float(spec)
            edges.append(entry)

        failures: list[dict[str, t.Any]] = []
        for name, scenario in self.failures.items():
            if scenario.failed_nodes is not None:
                failures.append({"name": name, "nodes": sorted(scenario.failed_nodes)})
            else:
                failures.append(
                    {"name": name, "edges": [list(e) for e in sorted(scenario.removed_edges)]}
                )

        doc: dict[str, t.Any] = {
            "nodes": self.model.node_count,
            "edges": edges,
            "dynamics": self.dynamics.to_dict(),
            "sensors": sorted(self.model.sensors),
        }
        if failures:
            doc["failures"] = failures
        if self.failure_set_names is not None:
            doc["failure_set"] = list(self.failure_set_names)
        return doc
