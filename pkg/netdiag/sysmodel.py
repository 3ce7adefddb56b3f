"""
Subsystem dynamics and the Kronecker assembly of the lumped networked system

    x' = Phi x,   y = Q x,   Phi = I_N (x) A + W (x) H,   Q = S (x) C

where ``W[i][j]`` is the weight of the edge ``(j, i)`` (row = receiving node)
and ``S`` selects the sensor nodes.
"""

from __future__ import annotations

import logging
import typing as t
from collections import Counter
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import numpy.typing as npt

from netdiag import const
from netdiag.errors import DimensionMismatchError, InvalidModelError, NoSensorsError
from netdiag.netgraph import FREE, Edge, NetworkModel

logger = logging.getLogger(__name__)

Matrix: t.TypeAlias = npt.NDArray[np.float64]


def _as_matrix(name: str, value: npt.ArrayLike) -> Matrix:
    arr = np.array(value, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or 0 in arr.shape:
        raise DimensionMismatchError(
            f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidModelError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SubsystemDynamics:
    """
    The dynamics shared by every node. ``H = B @ Gamma`` is derived and
    cannot be given directly.
    """

    A: Matrix
    B: Matrix
    Gamma: Matrix
    C: Matrix
    H: Matrix = field(init=False, repr=False)

    def __post_init__(self) -> None:
        A = _as_matrix("A", self.A)
        B = _as_matrix("B", self.B)
        Gamma = _as_matrix("Gamma", self.Gamma)
        C = _as_matrix("C", self.C)

        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatchError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatchError(f"B must have {n} rows, got {B.shape}")
        m = B.shape[1]
        if Gamma.shape != (m, n):
            raise DimensionMismatchError(
                f"Gamma must be {m}x{n} to match B and A, got {Gamma.shape}"
            )
        if C.shape[1] != n:
            raise DimensionMismatchError(f"C must have {n} columns, got {C.shape}")

        H = B @ Gamma
        H.setflags(write=False)
        for k, v in dict(A=A, B=B, Gamma=Gamma, C=C, H=H).items():
            object.__setattr__(self, k, v)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @classmethod
    def single_integrator(cls) -> SubsystemDynamics:
        return cls(A=[[0.0]], B=[[1.0]], Gamma=[[1.0]], C=[[1.0]])

    @classmethod
    def swing(cls, damping_ratio: float = 1.0) -> SubsystemDynamics:
        """
        Linearized swing equation with state (angle, frequency). The coupling
        drives the frequency with the neighbours' angles and the angle is
        measured. ``damping_ratio`` is d/m.
        """
        return cls(
            A=[[0.0, 1.0], [0.0, -damping_ratio]],
            B=[[0.0], [1.0]],
            Gamma=[[1.0, 0.0]],
            C=[[1.0, 0.0]],
        )

    def to_dict(self) -> dict[str, list[list[float]]]:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Gamma": self.Gamma.tolist(),
            "C": self.C.tolist(),
        }


class Provenance(StrEnum):
    SAMPLED_FREE = "sampled-free"
    FIXED_FROM_PATTERN = "fixed-from-pattern"
    ZERO = "zero"


@dataclass(frozen=True, eq=False)
class WeightRealization:
    """
    A numeric weight matrix for a model. ``provenance`` tells, for every
    edge carrying a nonzero weight, where its value came from. Entries
    without an edge are zero.
    """

    W: Matrix
    provenance: t.Mapping[Edge, Provenance]

    def __post_init__(self) -> None:
        W = np.array(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DimensionMismatchError(f"W must be square, got {W.shape}")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "provenance", dict(self.provenance))

        for row, col in zip(*np.nonzero(W)):
            edge = (int(col) + 1, int(row) + 1)
            if edge not in self.provenance:
                raise InvalidModelError(f"W carries a weight for non-edge {edge}")
        for edge, flag in self.provenance.items():
            if flag is Provenance.SAMPLED_FREE and self.weight(edge) == 0.0:
                raise InvalidModelError(f"Free edge {edge} received a zero weight")

    @property
    def node_count(self) -> int:
        return self.W.shape[0]

    def weight(self, edge: Edge) -> float:
        i, j = edge
        return float(self.W[j - 1, i - 1])

    def flag(self, edge: Edge) -> Provenance:
        return self.provenance.get(edge, Provenance.ZERO)

    def without(self, edges: t.Iterable[Edge]) -> WeightRealization:
        """The same realization with the given edges removed"""
        W = self.W.copy()
        prov = dict(self.provenance)
        for i, j in edges:
            W[j - 1, i - 1] = 0.0
            prov.pop((i, j), None)
        return WeightRealization(W, prov)

    def scaled(self, factor: float) -> WeightRealization:
        """Multiplies every free weight by ``factor``, fixed weights untouched"""
        if factor == 0.0:
            raise InvalidModelError("Scaling free weights by zero removes the edges")
        W = self.W.copy()
        for (i, j), flag in self.provenance.items():
            if flag is Provenance.SAMPLED_FREE:
                W[j - 1, i - 1] *= factor
        return WeightRealization(W, self.provenance)

    def counts(self) -> dict[str, int]:
        return dict(Counter(str(f) for f in self.provenance.values()))


@dataclass(frozen=True)
class LumpedDims:
    N: int
    n: int
    m: int
    p: int
    sensor_count: int

    @property
    def n_x(self) -> int:
        return self.N * self.n

    @property
    def n_y(self) -> int:
        return self.sensor_count * self.p


class Channel(t.NamedTuple):
    """One output row: row ``row`` (1-based) of ``C`` applied at sensor ``node``"""

    node: int
    row: int
    rows: int = 1

    @property
    def name(self) -> str:
        if self.rows == 1:
            return f"y{self.node}"
        return f"y{self.node}.{self.row}"


@dataclass(frozen=True, eq=False)
class LumpedRealization:
    Phi: Matrix
    Q: Matrix
    dims: LumpedDims
    sensors: tuple[int, ...] = ()

    @property
    def channels(self) -> tuple[Channel, ...]:
        """Output channels in the row order of ``Q``"""
        p = self.dims.p
        return tuple(Channel(s, k + 1, p) for s in self.sensors for k in range(p))


def _realize(
    model: NetworkModel, free_values: t.Mapping[Edge, float]
) -> WeightRealization:
    N = model.node_count
    W = np.zeros((N, N))
    prov: dict[Edge, Provenance] = {}
    for edge in model.sorted_edges:
        i, j = edge
        spec = model.weight_pattern[edge]
        if spec is FREE:
            W[j - 1, i - 1] = free_values[edge]
            prov[edge] = Provenance.SAMPLED_FREE
        else:
            W[j - 1, i - 1] = float(spec)
            prov[edge] = Provenance.FIXED_FROM_PATTERN
    return WeightRealization(W, prov)


def sample_weights(model: NetworkModel, seed: int) -> WeightRealization:
    """
    Fixed edges keep their value. Free edges, in sorted edge order, draw
    independently and uniformly from [-2, -0.1] U [0.1, 2].
    """
    rng = np.random.default_rng(seed)
    free = model.free_edges
    magnitudes = rng.uniform(const.WEIGHT_MIN, const.WEIGHT_MAX, size=len(free))
    signs = np.where(rng.random(len(free)) < 0.5, -1.0, 1.0)
    values = {e: float(s * v) for e, s, v in zip(free, signs, magnitudes)}
    logger.debug("Sampled %d free weights with seed %d", len(values), seed)
    return _realize(model, values)


def realize_pattern(model: NetworkModel, free_value: float = 1.0) -> WeightRealization:
    """
    Realizes the pattern with every free weight at its nominal value, or at
    ``free_value`` when the model gives none
    """
    if free_value == 0.0:
        raise InvalidModelError("Free weights cannot be realized as zero")
    return _realize(
        model, {e: model.nominal_weights.get(e, free_value) for e in model.free_edges}
    )


def assemble_lumped(
    dyn: SubsystemDynamics, weights: WeightRealization, sensors: t.Iterable[int]
) -> LumpedRealization:
    N = weights.node_count
    sensor_list = sorted(set(sensors))
    if not sensor_list:
        raise NoSensorsError("Cannot build the output map without sensors")
    if sensor_list[0] < 1 or sensor_list[-1] > N:
        raise DimensionMismatchError(f"Sensors {sensor_list} exceed the {N} nodes of W")

    n, p = dyn.n, dyn.p
    phi = np.kron(np.eye(N), dyn.A) + np.kron(weights.W, dyn.H)

    q = np.zeros((len(sensor_list) * p, N * n))
    for k, s in enumerate(sensor_list):
        q[k * p : (k + 1) * p, (s - 1) * n : s * n] = dyn.C

    dims = LumpedDims(N=N, n=n, m=dyn.m, p=p, sensor_count=len(sensor_list))
    return LumpedRealization(phi, q, dims, tuple(sensor_list))


def delta_phi(
    w_i: WeightRealization, w_j: WeightRealization, dyn: SubsystemDynamics
) -> Matrix:
    """``Phi_i - Phi_j = (W_i - W_j) (x) H``"""
    if w_i.W.shape != w_j.W.shape:
        raise DimensionMismatchError(
            f"Realizations have different sizes: {w_i.W.shape} vs {w_j.W.shape}"
        )
    return np.kron(w_i.W - w_j.W, dyn.H)
