from __future__ import annotations

import math
import typing as t

Distance: t.TypeAlias = int | float
"""A hop count, or ``math.inf`` when no directed path exists"""


def is_infinite(value: Distance) -> bool:
    return isinstance(value, float) and math.isinf(value)


def fmt_distance(value: Distance) -> str:
    if is_infinite(value):
        return "infinite"
    return str(int(value))


def distance_to_json(value: Distance) -> int | str:
    if is_infinite(value):
        return "infinite"
    return int(value)


def parse_nodes(value: t.Any) -> frozenset[int]:
    """
    Parses a comma separated node list such as ``"1,4"`` as passed on
    the command line
    """
    if isinstance(value, list):
        value = ",".join(value)

    nodes: set[int] = set()
    for raw in str(value).split(","):
        raw = raw.strip()
        if not raw:
            continue
        try:
            nodes.add(int(raw))
        except ValueError as e:
            raise ValueError(f"{raw!r} is not a node index") from e

    if not nodes:
        raise ValueError(f"Expected at least one node index, got {value!r}")
    return frozenset(nodes)
