"""
Graph-theoretic generic verdicts. A failure is generically detectable iff
some ending node of its links reaches a sensor within ``r_max - 1`` hops,
where ``r_max`` is the transfer index of the subsystem dynamics. Isolability
of a failure set applies the same test to every pair of scenarios.
"""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import scipy.linalg as sla

from netdiag import const
from netdiag._util import Distance, distance_to_json, fmt_distance, is_infinite
from netdiag.errors import SolveError
from netdiag.netgraph import (
    Edge,
    FailureScenario,
    FailureSet,
    NetworkModel,
    ScenarioLike,
    ending_nodes,
    failed_graph,
    scenario_difference,
    set_distance,
)
from netdiag.sysmodel import SubsystemDynamics

logger = logging.getLogger(__name__)

Pair: t.TypeAlias = tuple[int, int]


class Certification(StrEnum):
    CAP_RULE = "cap-rule"
    ZERO_OUTPUT = "zero-output"


@dataclass(frozen=True)
class TransferIndex:
    """
    Largest ``i`` with ``C [(lI - A)^-1 H]^i`` not identically zero, or
    ``math.inf`` when no power vanishes.
    """

    value: Distance
    certified_by: Certification

    def __post_init__(self) -> None:
        if is_infinite(self.value) != (self.certified_by is Certification.CAP_RULE):
            raise ValueError("Only the cap rule certifies an infinite transfer index")

    @property
    def is_infinite(self) -> bool:
        return is_infinite(self.value)

    @property
    def reach(self) -> Distance:
        """The hop budget ``r_max - 1``"""
        return self.value - 1

    def __str__(self) -> str:
        return fmt_distance(self.value)

    def to_dict(self) -> dict[str, t.Any]:
        return {"value": distance_to_json(self.value), "certified_by": str(self.certified_by)}


class StructuralOutcome(StrEnum):
    GENERICALLY_DETECTABLE = "generically-detectable"
    GENERICALLY_UNDETECTABLE = "generically-undetectable"
    GENERICALLY_ISOLABLE = "generically-isolable"
    GENERICALLY_NOT_ISOLABLE = "generically-not-isolable"


class Route(StrEnum):
    DETECTION = "detection"
    PAIRWISE = "pairwise"
    DISJOINT_SHORTCUT = "disjoint-shortcut"


_POSITIVE = {StructuralOutcome.GENERICALLY_DETECTABLE, StructuralOutcome.GENERICALLY_ISOLABLE}


@dataclass(frozen=True)
class StructuralVerdict:
    verdict: StructuralOutcome
    distance: Distance
    r_max: TransferIndex
    witness_path: tuple[int, ...] | None = None
    failing_pair: Pair | None = None
    pair_distances: t.Mapping[Pair, Distance] = field(default_factory=dict)
    route: Route = Route.DETECTION

    @property
    def holds(self) -> bool:
        return self.verdict in _POSITIVE

    def to_dict(self) -> dict[str, t.Any]:
        doc: dict[str, t.Any] = {
            "verdict": str(self.verdict),
            "distance": distance_to_json(self.distance),
            "r_max": self.r_max.to_dict(),
            "route": str(self.route),
        }
        if self.witness_path is not None:
            doc["witness_path"] = list(self.witness_path)
        if self.failing_pair is not None:
            doc["failing_pair"] = list(self.failing_pair)
        if self.pair_distances:
            doc["pair_distances"] = {
                f"{i},{j}": distance_to_json(d) for (i, j), d in sorted(self.pair_distances.items())
            }
        return doc


@dataclass(frozen=True)
class SubsetCounterexample:
    """
    Scenario ``superset`` removes every link of ``subset`` plus a difference
    that is generically undetectable, so the two are never distinguishable.
    ``distance`` is measured after the smaller failure, ``nominal_distance``
    in the faultless graph.
    """

    pair: Pair
    difference: frozenset[Edge]
    distance: Distance
    nominal_distance: Distance

    @property
    def nominal_reading_agrees(self) -> bool:
        return self.distance == self.nominal_distance or (
            is_infinite(self.distance) and is_infinite(self.nominal_distance)
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "pair": list(self.pair),
            "difference": [list(e) for e in sorted(self.difference)],
            "distance": distance_to_json(self.distance),
            "nominal_distance": distance_to_json(self.nominal_distance),
        }


def _sample_points(a: np.ndarray, count: int, rng: np.random.Generator) -> list[complex]:
    radius = 2.0 * float(np.max(np.abs(np.linalg.eigvals(a)), initial=0.0)) + 1.0
    return [
        complex(rng.uniform(1.05, 2.0) * radius * np.exp(1j * rng.uniform(0.0, 2 * np.pi)))
        for _ in range(count)
    ]


def _normalized_hs(dyn: SubsystemDynamics, lam: complex) -> np.ndarray:
    h_s = sla.solve(lam * np.eye(dyn.n) - dyn.A, dyn.H.astype(complex))
    norm = float(np.linalg.norm(h_s, 2))
    return h_s / norm if norm > 0 else h_s


def transfer_index(
    dyn: SubsystemDynamics,
    tol: float = const.DEFAULT_TOL,
    seed: int = 0,
    cap: int | None = None,
    samples: int = const.DEFAULT_TRANSFER_SAMPLES,
) -> TransferIndex:
    """
    Finds the first power ``i`` in ``1..cap`` (``cap`` defaults to ``n``) for
    which ``C H_s(l)^i`` vanishes at every sample point and returns ``i - 1``.
    If none vanishes by ``n`` no later power does either, since the kernels
    of the powers of an n-dimensional operator stop growing by step n.
    """
    if not np.any(dyn.C):
        logger.warning("Output matrix C is zero, no failure can ever be observed")
        return TransferIndex(0, Certification.ZERO_OUTPUT)

    cap = dyn.n if cap is None else cap
    rng = np.random.default_rng(seed)

    hats: list[np.ndarray] = []
    for lam in _sample_points(dyn.A, samples, rng):
        for _attempt in range(const.MAX_SOLVE_RETRIES):
            try:
                hats.append(_normalized_hs(dyn, lam))
                break
            except (sla.LinAlgError, ValueError):
                lam = _sample_points(dyn.A, 1, rng)[0]
        else:
            raise SolveError("Could not evaluate (lI - A)^-1 H at any sample point")

    # Each power is renormalized so that only its ratio to the previous one
    # decides the zero test
    c = dyn.C.astype(complex)
    current = [c / np.linalg.norm(c) for _ in hats]
    for i in range(1, cap + 1):
        nxt = [m @ h for m, h in zip(current, hats)]
        ratios = [float(np.linalg.norm(m)) for m in nxt]
        if all(r <= tol for r in ratios):
            logger.debug("C H_s^%d vanishes at all sample points", i)
            return TransferIndex(i - 1, Certification.ZERO_OUTPUT)
        current = [m / max(r, np.finfo(float).tiny) for m, r in zip(nxt, ratios)]

    return TransferIndex(math.inf, Certification.CAP_RULE)


def satisfies_index_condition(distance: Distance, r_max: TransferIndex) -> bool:
    """``d <= r_max - 1``, false whenever ``d`` is infinite"""
    if is_infinite(distance):
        return False
    return distance <= r_max.reach


def distance_index(model: NetworkModel, failure: ScenarioLike | t.Iterable[Edge]) -> Distance:
    """Shortest distance from the failure's ending nodes to a sensor in the faultless graph"""
    sensors = model.require_sensors()
    d, _ = set_distance(model.graph, ending_nodes(failure), sensors)
    return d


def generically_detectable(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure: FailureScenario,
    r_max: TransferIndex | None = None,
    tol: float = const.DEFAULT_TOL,
) -> StructuralVerdict:
    failure.validate_for(model)
    sensors = model.require_sensors()
    r_max = r_max or transfer_index(dyn, tol)

    d, path = set_distance(model.graph, ending_nodes(failure), sensors)
    if satisfies_index_condition(d, r_max):
        return StructuralVerdict(
            StructuralOutcome.GENERICALLY_DETECTABLE,
            d,
            r_max,
            witness_path=tuple(path) if path else None,
        )
    return StructuralVerdict(
        StructuralOutcome.GENERICALLY_UNDETECTABLE, d, r_max, failing_pair=(0, 1)
    )


def pair_distance(model: NetworkModel, e_i: ScenarioLike, e_j: ScenarioLike) -> Distance:
    """
    Distance from the ending nodes of the symmetric difference of the two
    scenarios to the sensors, measured after failure ``e_i``
    """
    sensors = model.require_sensors()
    diff = scenario_difference(e_i, e_j)
    d, _ = set_distance(failed_graph(model, e_i), ending_nodes(diff), sensors)
    return d


def pair_generically_distinguishable(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    e_i: ScenarioLike,
    e_j: ScenarioLike,
    r_max: TransferIndex | None = None,
) -> bool:
    r_max = r_max or transfer_index(dyn)
    return satisfies_index_condition(pair_distance(model, e_i, e_j), r_max)


def generically_isolable(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure_set: FailureSet,
    r_max: TransferIndex | None = None,
    tol: float = const.DEFAULT_TOL,
) -> StructuralVerdict:
    """
    Computes ``d_ij`` for every pair including the faultless scenario and
    compares their maximum with ``r_max - 1``. The reported failing pair is
    the lexicographically first one.
    """
    failure_set.validate_for(model)
    model.require_sensors()
    r_max = r_max or transfer_index(dyn, tol)

    distances: dict[Pair, Distance] = {}
    failing: Pair | None = None
    for i, j in failure_set.pairs():
        d = pair_distance(model, failure_set.scenario(i), failure_set.scenario(j))
        distances[(i, j)] = d
        if failing is None and not satisfies_index_condition(d, r_max):
            failing = (i, j)

    worst = max(distances.values())
    outcome = (
        StructuralOutcome.GENERICALLY_ISOLABLE
        if failing is None
        else StructuralOutcome.GENERICALLY_NOT_ISOLABLE
    )
    return StructuralVerdict(
        outcome,
        worst,
        r_max,
        failing_pair=failing,
        pair_distances=distances,
        route=Route.PAIRWISE,
    )


def disjoint_isolability_shortcut(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure_set: FailureSet,
    r_max: TransferIndex | None = None,
    tol: float = const.DEFAULT_TOL,
) -> StructuralVerdict | None:
    """
    For edge-disjoint failure sets isolability reduces to detectability of
    every member. Returns ``None`` when the scenarios overlap.
    """
    if not failure_set.is_edge_disjoint():
        return None

    r_max = r_max or transfer_index(dyn, tol)
    worst: Distance = 0
    failing: Pair | None = None
    distances: dict[Pair, Distance] = {}
    for k, scenario in enumerate(failure_set.scenarios, start=1):
        v = generically_detectable(dyn, model, scenario, r_max)
        distances[(0, k)] = v.distance
        worst = max(worst, v.distance)
        if failing is None and not v.holds:
            failing = (0, k)

    outcome = (
        StructuralOutcome.GENERICALLY_ISOLABLE
        if failing is None
        else StructuralOutcome.GENERICALLY_NOT_ISOLABLE
    )
    return StructuralVerdict(
        outcome,
        worst,
        r_max,
        failing_pair=failing,
        pair_distances=distances,
        route=Route.DISJOINT_SHORTCUT,
    )


def subset_nonisolability_screen(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure_set: FailureSet,
    r_max: TransferIndex | None = None,
    tol: float = const.DEFAULT_TOL,
) -> SubsetCounterexample | None:
    """
    Looks for two listed scenarios where one contains the other and the
    extra links are generically undetectable after the smaller failure.
    Also records the reading in the faultless graph, which can differ.
    """
    model.require_sensors()
    r_max = r_max or transfer_index(dyn, tol)

    for i, j in failure_set.pairs():
        if i == 0:
            continue
        e_i, e_j = failure_set.edges_of(i), failure_set.edges_of(j)
        if e_j <= e_i:
            small, large = j, i
        elif e_i <= e_j:
            small, large = i, j
        else:
            continue

        difference = e_i ^ e_j
        d = pair_distance(model, failure_set.scenario(small), failure_set.scenario(large))
        if satisfies_index_condition(d, r_max):
            continue

        nominal = distance_index(model, difference)
        counterexample = SubsetCounterexample((i, j), difference, d, nominal)
        if not counterexample.nominal_reading_agrees:
            logger.info(
                "Pair %s: difference distance is %s after the smaller failure but %s in the faultless graph",
                (i, j),
                fmt_distance(d),
                fmt_distance(nominal),
            )
        return counterexample
    return None
