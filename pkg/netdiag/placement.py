"""
Sensor placement as a hitting-set problem. Each failure (or pair of
failures) yields the set of nodes where a sensor would observe it; a
placement must hit every such set.
"""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass
from enum import StrEnum
from functools import reduce
from itertools import combinations
from operator import or_

from netdiag import const
from netdiag.errors import InfeasiblePlacementError, SearchLimitError
from netdiag.netgraph import (
    FailureScenario,
    FailureSet,
    NetworkModel,
    ending_nodes,
    failed_graph,
    reach_set,
    receiving_nodes,
    scenario_difference,
)
from netdiag.structural import TransferIndex, transfer_index
from netdiag.sysmodel import SubsystemDynamics

logger = logging.getLogger(__name__)

Origin: t.TypeAlias = int | tuple[int, int]


def _describe(origin: Origin) -> str:
    if isinstance(origin, tuple):
        i, j = origin
        return f"no sensor location can generically distinguish scenarios {i} and {j}"
    return f"no sensor location can generically detect failures ending at node {origin}"


@dataclass(frozen=True)
class Target:
    """Nodes where one sensor suffices for ``origin``: a receiving node or a scenario pair"""

    members: frozenset[int]
    origin: Origin

    def to_dict(self) -> dict[str, t.Any]:
        origin = list(self.origin) if isinstance(self.origin, tuple) else self.origin
        return {"origin": origin, "members": sorted(self.members)}


@dataclass(frozen=True)
class HittingSetInstance:
    ground_set: tuple[int, ...]
    targets: tuple[Target, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ground_set", tuple(sorted(set(self.ground_set))))
        object.__setattr__(self, "targets", tuple(self.targets))
        ground = frozenset(self.ground_set)
        for target in self.targets:
            if not target.members:
                raise InfeasiblePlacementError(_describe(target.origin), origin=target.origin)
            if not target.members <= ground:
                raise ValueError(
                    f"Target for {target.origin} has nodes outside the ground set: "
                    f"{sorted(target.members - ground)}"
                )

    @property
    def q(self) -> int:
        return len(self.targets)

    def covered_by(self, sensors: t.Iterable[int]) -> int:
        chosen = frozenset(sensors)
        return sum(1 for target in self.targets if target.members & chosen)

    def is_hit_by(self, sensors: t.Iterable[int]) -> bool:
        return self.covered_by(sensors) == self.q

    def restricted_to(self, candidates: t.Iterable[int]) -> HittingSetInstance:
        """Only ``candidates`` may host a sensor"""
        allowed = frozenset(candidates)
        return HittingSetInstance(
            tuple(n for n in self.ground_set if n in allowed),
            tuple(Target(tg.members & allowed, tg.origin) for tg in self.targets),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "ground_set": list(self.ground_set),
            "targets": [tg.to_dict() for tg in self.targets],
        }


class Optimality(StrEnum):
    GREEDY_ONLY = "greedy-only"
    PROVED_OPTIMAL = "proved-optimal"


@dataclass(frozen=True)
class PlacementResult:
    """``sensors`` is in selection order for the greedy solver"""

    sensors: tuple[int, ...]
    covered: int
    optimal_flag: Optimality
    bound: float

    @property
    def sensor_set(self) -> frozenset[int]:
        return frozenset(self.sensors)

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "sensors": list(self.sensors),
            "size": len(self.sensors),
            "covered": self.covered,
            "optimality": str(self.optimal_flag),
            "bound": self.bound,
        }


def approximation_bound(q: int) -> float:
    """The greedy guarantee ``1 + ln q``"""
    return 1.0 + math.log(q) if q > 0 else 1.0


def _usable_index(dyn: SubsystemDynamics, r_max: TransferIndex | None) -> TransferIndex:
    r_max = r_max or transfer_index(dyn)
    if r_max.value == 0:
        raise InfeasiblePlacementError(
            "The transfer index is 0, so no sensor placement can observe any failure"
        )
    return r_max


def build_detect_instance(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    r_max: TransferIndex | None = None,
) -> HittingSetInstance:
    """One target per receiving node: everything within ``r_max - 1`` hops of it"""
    r_max = _usable_index(dyn, r_max)
    targets = [
        Target(reach_set(model.graph, i, r_max.reach), origin=i)
        for i in sorted(receiving_nodes(model))
    ]
    return HittingSetInstance(tuple(model.nodes), tuple(targets))


def build_isolate_instance(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure_set: FailureSet,
    r_max: TransferIndex | None = None,
) -> HittingSetInstance:
    """
    One target per scenario pair ``i < j``: the nodes within ``r_max - 1``
    hops of an ending node of their difference, after failure ``i``
    """
    failure_set.validate_for(model)
    r_max = _usable_index(dyn, r_max)

    targets: list[Target] = []
    for i, j in failure_set.pairs():
        diff = scenario_difference(failure_set.scenario(i), failure_set.scenario(j))
        graph = failed_graph(model, failure_set.scenario(i))
        members = reduce(
            or_, (reach_set(graph, k, r_max.reach) for k in ending_nodes(diff)), frozenset()
        )
        targets.append(Target(members, origin=(i, j)))
    return HittingSetInstance(tuple(model.nodes), tuple(targets))


def _masks(instance: HittingSetInstance) -> dict[int, int]:
    masks = {n: 0 for n in instance.ground_set}
    for bit, target in enumerate(instance.targets):
        for n in target.members:
            masks[n] |= 1 << bit
    return masks


def greedy_hitting_set(instance: HittingSetInstance) -> PlacementResult:
    """
    Repeatedly picks the node hitting the most targets not hit yet. Ties
    go to the smallest node index.
    """
    masks = _masks(instance)
    full = (1 << instance.q) - 1
    hit = 0
    chosen: list[int] = []
    while hit != full:
        node, gain = max(
            ((n, (m & ~hit).bit_count()) for n, m in masks.items() if n not in chosen),
            key=lambda item: (item[1], -item[0]),
            default=(None, 0),
        )
        if node is None or gain == 0:
            raise InfeasiblePlacementError("Some target cannot be hit by any candidate")
        logger.debug("Greedy picks node %d covering %d more targets", node, gain)
        chosen.append(node)
        hit |= masks[node]

    return PlacementResult(
        tuple(chosen),
        covered=instance.q,
        optimal_flag=Optimality.GREEDY_ONLY,
        bound=approximation_bound(instance.q),
    )


def exact_hitting_set(
    instance: HittingSetInstance, size_limit: int = const.DEFAULT_EXACT_LIMIT
) -> PlacementResult:
    """
    Exhaustive search by increasing size, lexicographic within a size. The
    first hitting set found is a minimum one.
    """
    if len(instance.ground_set) > size_limit:
        raise SearchLimitError(
            f"Exact search is limited to {size_limit} candidate nodes, "
            f"the instance has {len(instance.ground_set)}"
        )

    masks = _masks(instance)
    full = (1 << instance.q) - 1
    for size in range(len(instance.ground_set) + 1):
        for combo in combinations(instance.ground_set, size):
            if reduce(or_, (masks[n] for n in combo), 0) == full:
                return PlacementResult(
                    combo,
                    covered=instance.q,
                    optimal_flag=Optimality.PROVED_OPTIMAL,
                    bound=approximation_bound(instance.q),
                )

    raise InfeasiblePlacementError("No subset of the candidates hits every target")


def detect_sensor_locations(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure: FailureScenario,
    r_max: TransferIndex | None = None,
) -> frozenset[int]:
    """
    Nodes where one sensor on its own makes ``failure`` generically
    detectable: everything within ``r_max - 1`` hops of an ending node of
    the failed links. Empty when the transfer index is 0.
    """
    failure.validate_for(model)
    r_max = r_max or transfer_index(dyn)
    if r_max.value == 0:
        return frozenset()
    return reduce(
        or_, (reach_set(model.graph, k, r_max.reach) for k in ending_nodes(failure)), frozenset()
    )
