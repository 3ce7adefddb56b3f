"""
Interconnection topology of a networked system: the directed graph, its link
weight pattern, the sensor set, and the failures that remove links from it.

An edge ``(i, j)`` always points from node ``i`` to node ``j``. Nodes are
numbered ``1..N``.
"""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field
from enum import Enum, auto
from functools import cached_property
from itertools import combinations

import networkx as nx

from netdiag._util import Distance
from netdiag.errors import (
    DegenerateFailureError,
    IdenticalScenariosError,
    InvalidModelError,
    NoSensorsError,
)

logger = logging.getLogger(__name__)

Edge: t.TypeAlias = tuple[int, int]


class Free(Enum):
    """Marks a link weight that is a free parameter of the model"""

    FREE = auto()


FREE = Free.FREE

WeightSpec: t.TypeAlias = float | Free


def _check_node(node: int, node_count: int) -> None:
    if not 1 <= node <= node_count:
        raise InvalidModelError(f"Node {node} is out of range 1..{node_count}")


@dataclass(frozen=True)
class NetworkModel:
    node_count: int
    edges: frozenset[Edge]
    weight_pattern: t.Mapping[Edge, WeightSpec]
    sensors: frozenset[int] = frozenset()
    nominal_weights: t.Mapping[Edge, float] = field(default_factory=dict)
    """Reference values of free weights, used for simulation only"""

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "sensors", frozenset(self.sensors))
        object.__setattr__(self, "weight_pattern", dict(self.weight_pattern))
        object.__setattr__(self, "nominal_weights", dict(self.nominal_weights))

        if self.node_count < 1:
            raise InvalidModelError(
                f"A network needs at least one node, got {self.node_count}"
            )

        for i, j in self.edges:
            _check_node(i, self.node_count)
            _check_node(j, self.node_count)

        for s in self.sensors:
            _check_node(s, self.node_count)

        if unknown := set(self.weight_pattern) - self.edges:
            raise InvalidModelError(
                f"Weight pattern references edges not in the model: {sorted(unknown)}"
            )
        if missing := self.edges - set(self.weight_pattern):
            raise InvalidModelError(f"Edges without a weight: {sorted(missing)}")

        for edge, spec in self.weight_pattern.items():
            if spec is FREE:
                continue
            value = float(spec)
            if value == 0.0 or not math.isfinite(value):
                raise InvalidModelError(
                    f"Fixed weight of edge {edge} must be finite and nonzero, got {spec}"
                )

        for edge, value in self.nominal_weights.items():
            if self.weight_pattern.get(edge) is not FREE:
                raise InvalidModelError(f"Nominal value given for non-free edge {edge}")
            if value == 0.0 or not math.isfinite(value):
                raise InvalidModelError(
                    f"Nominal weight of edge {edge} must be finite and nonzero, got {value}"
                )

    @classmethod
    def build(
        cls,
        node_count: int,
        edges: t.Iterable[Edge],
        sensors: t.Iterable[int] = (),
        weights: t.Mapping[Edge, WeightSpec] | None = None,
        nominal: t.Mapping[Edge, float] | None = None,
    ) -> NetworkModel:
        """
        Builds a model from an edge list. Edges missing from ``weights`` get
        a free weight.
        """
        edge_list = [(int(i), int(j)) for i, j in edges]
        seen: set[Edge] = set()
        for e in edge_list:
            if e in seen:
                raise InvalidModelError(f"Edge {e} is listed more than once")
            seen.add(e)

        weights = weights or {}
        pattern = {e: weights.get(e, FREE) for e in edge_list}
        return cls(
            node_count, frozenset(edge_list), pattern, frozenset(sensors), dict(nominal or {})
        )

    @property
    def nodes(self) -> range:
        return range(1, self.node_count + 1)

    @property
    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    @property
    def free_edges(self) -> list[Edge]:
        return [e for e in self.sorted_edges if self.weight_pattern[e] is FREE]

    @property
    def is_fully_fixed(self) -> bool:
        return not self.free_edges

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.sorted_edges)
        return g

    def with_sensors(self, sensors: t.Iterable[int]) -> NetworkModel:
        return NetworkModel(
            self.node_count,
            self.edges,
            self.weight_pattern,
            frozenset(sensors),
            self.nominal_weights,
        )

    def require_sensors(self) -> frozenset[int]:
        if not self.sensors:
            raise NoSensorsError("The query needs at least one sensor node")
        return self.sensors


@dataclass(frozen=True)
class FailureScenario:
    """
    A set of removed links. ``name`` and ``failed_nodes`` are descriptive
    only: two scenarios are equal when they remove the same edges.
    """

    removed_edges: frozenset[Edge]
    name: str | None = field(default=None, compare=False)
    failed_nodes: frozenset[int] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        edges = frozenset((int(i), int(j)) for i, j in self.removed_edges)
        object.__setattr__(self, "removed_edges", edges)
        if not edges:
            what = f"Failure {self.name!r}" if self.name else "A failure"
            raise DegenerateFailureError(f"{what} removes no edge")

    @classmethod
    def of(cls, *edges: Edge, name: str | None = None) -> FailureScenario:
        return cls(frozenset(edges), name=name)

    def validate_for(self, model: NetworkModel) -> None:
        if unknown := self.removed_edges - model.edges:
            raise InvalidModelError(
                f"Failure {self.label} references edges not in the model: {sorted(unknown)}"
            )

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return "{" + ",".join(f"({i},{j})" for i, j in sorted(self.removed_edges)) + "}"


ScenarioLike: t.TypeAlias = FailureScenario | None
"""A listed scenario, or ``None`` for the faultless scenario E_0"""


def edges_of(scenario: ScenarioLike | t.Iterable[Edge]) -> frozenset[Edge]:
    if scenario is None:
        return frozenset()
    if isinstance(scenario, FailureScenario):
        return scenario.removed_edges
    return frozenset(scenario)


@dataclass(frozen=True)
class FailureSet:
    """
    An ordered list of candidate failures ``E_1..E_r``. The faultless
    scenario ``E_0`` is implicit and sits at index 0.
    """

    scenarios: tuple[FailureScenario, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise InvalidModelError("A failure set needs at least one scenario")

        first_seen: dict[frozenset[Edge], int] = {}
        for idx, s in enumerate(self.scenarios, start=1):
            if (prev := first_seen.get(s.removed_edges)) is not None:
                raise IdenticalScenariosError(
                    f"Scenarios {prev} and {idx} remove the same edges, "
                    "so they always produce the same outputs and the set is never isolable",
                    pair=(prev, idx),
                )
            first_seen[s.removed_edges] = idx

    @property
    def r(self) -> int:
        return len(self.scenarios)

    def scenario(self, i: int) -> ScenarioLike:
        if i == 0:
            return None
        return self.scenarios[i - 1]

    def edges_of(self, i: int) -> frozenset[Edge]:
        return edges_of(self.scenario(i))

    def label(self, i: int) -> str:
        s = self.scenario(i)
        return "nominal" if s is None else s.label

    def pairs(self) -> t.Iterator[tuple[int, int]]:
        """All ``(i, j)`` with ``0 <= i < j <= r`` in lexicographic order"""
        return combinations(range(self.r + 1), 2)

    def is_edge_disjoint(self) -> bool:
        return all(
            not (a.removed_edges & b.removed_edges)
            for a, b in combinations(self.scenarios, 2)
        )

    def validate_for(self, model: NetworkModel) -> None:
        for s in self.scenarios:
            s.validate_for(model)


def shortest_distance(model: NetworkModel, source: int, target: int) -> Distance:
    """
    Hop count of the shortest directed path from ``source`` to ``target``,
    0 when they coincide and ``math.inf`` when no path exists.
    """
    _check_node(source, model.node_count)
    _check_node(target, model.node_count)
    return graph_distance(model.graph, source, target)


def graph_distance(graph: nx.DiGraph, source: int, target: int) -> Distance:
    try:
        return nx.shortest_path_length(graph, source, target)
    except nx.NetworkXNoPath:
        return math.inf


def apply_failure(model: NetworkModel, failure: FailureScenario) -> NetworkModel:
    failure.validate_for(model)
    remaining = model.edges - failure.removed_edges
    pattern = {e: w for e, w in model.weight_pattern.items() if e in remaining}
    nominal = {e: w for e, w in model.nominal_weights.items() if e in remaining}
    return NetworkModel(model.node_count, remaining, pattern, model.sensors, nominal)


def node_failure_to_links(
    model: NetworkModel, failed_nodes: t.Iterable[int], name: str | None = None
) -> FailureScenario:
    """
    Turns the failure of whole nodes into the removal of every edge adjacent
    to them, self-loops included.
    """
    nodes = frozenset(failed_nodes)
    if not nodes:
        raise DegenerateFailureError("A node failure needs at least one node")

    removed: set[Edge] = set()
    for n in sorted(nodes):
        _check_node(n, model.node_count)
        adjacent = {e for e in model.edges if n in e}
        if not adjacent:
            raise DegenerateFailureError(
                f"Node {n} has no adjacent edge, so its failure removes nothing"
            )
        removed |= adjacent

    logger.debug("Node failure %s removes %d edges", sorted(nodes), len(removed))
    return FailureScenario(frozenset(removed), name=name, failed_nodes=nodes)


def ending_nodes(failure: ScenarioLike | t.Iterable[Edge]) -> frozenset[int]:
    """The heads of the removed edges"""
    return frozenset(j for _, j in edges_of(failure))


def scenario_difference(e_i: ScenarioLike, e_j: ScenarioLike) -> frozenset[Edge]:
    diff = edges_of(e_i) ^ edges_of(e_j)
    if not diff:
        raise IdenticalScenariosError(
            "The two scenarios remove the same edges and are never distinguishable"
        )
    return diff


def receiving_nodes(model: NetworkModel) -> frozenset[int]:
    return frozenset(j for _, j in model.edges)


def failed_graph(model: NetworkModel, failure: ScenarioLike) -> nx.DiGraph:
    """Read-only view of the graph with the scenario's edges removed"""
    removed = edges_of(failure)
    if not removed:
        return model.graph
    return nx.restricted_view(model.graph, [], list(removed))


def set_distance(
    graph: nx.DiGraph, sources: t.Iterable[int], targets: t.Iterable[int]
) -> tuple[Distance, list[int] | None]:
    """
    Minimum hop distance from any node of ``sources`` to any of ``targets``,
    with one shortest path realizing it. Ties go to the smallest source and
    then the smallest target.
    """
    target_set = frozenset(targets)
    best: tuple[int, int, int] | None = None
    for v in sorted(frozenset(sources)):
        lengths = nx.single_source_shortest_path_length(graph, v)
        for u in sorted(target_set & lengths.keys()):
            cand = (lengths[u], v, u)
            if best is None or cand < best:
                best = cand

    if best is None:
        return math.inf, None

    d, v, u = best
    return d, list(nx.shortest_path(graph, v, u))


def reach_set(graph: nx.DiGraph, source: int, cutoff: Distance) -> frozenset[int]:
    """Nodes within ``cutoff`` hops of ``source``, ``source`` included"""
    limit = None if math.isinf(cutoff) else int(cutoff)
    return frozenset(nx.single_source_shortest_path_length(graph, source, cutoff=limit))
