from __future__ import annotations

import typing as t


def distance(this: str, other: str) -> int:
    if not this or not other:
        return max(len(this), len(other))

    prev = list(range(len(other) + 1))
    for i, a in enumerate(this, start=1):
        curr = [i]
        for j, b in enumerate(other, start=1):
            curr.append(min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + (a != b)))
        prev = curr
    return prev[-1]


def closest(name: str, candidates: t.Iterable[str], max_distance: int = 2) -> str | None:
    """
    Returns the candidate closest to ``name`` if it is within ``max_distance``
    edits. Used to suggest failure names after a typo.
    """
    best: tuple[int, str] | None = None
    for cand in sorted(candidates):
        d = distance(name, cand)
        if d <= max_distance and (best is None or d < best[0]):
            best = (d, cand)
    return best[1] if best else None
