"""
Realization-level distinguishability tests.

Two systems ``(Phi_i, Q)`` and ``(Phi_j, Q)`` are distinguishable iff some
column of ``dPhi = Phi_i - Phi_j`` leaves the unobservable subspace of
``(Phi_i, Q)``, equivalently iff ``Q (lI - Phi_i)^-1 dPhi`` is not the zero
rational matrix. Detectability and isolability of failures reduce to these
tests on the realizations with the failed edges zeroed. Sampling several
realizations turns them into generic verdicts.
"""

from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import scipy.linalg as sla

from netdiag import const
from netdiag.errors import (
    DimensionMismatchError,
    PreconditionError,
    SolveError,
)
from netdiag.netgraph import (
    FailureScenario,
    FailureSet,
    NetworkModel,
)
from netdiag.sysmodel import (
    LumpedRealization,
    Matrix,
    SubsystemDynamics,
    WeightRealization,
    assemble_lumped,
    delta_phi,
    sample_weights,
)

logger = logging.getLogger(__name__)

Pair: t.TypeAlias = tuple[int, int]


class Distinguishability(StrEnum):
    DISTINGUISHABLE = "distinguishable"
    INDISTINGUISHABLE = "indistinguishable"


class Generic(StrEnum):
    GENERICALLY_TRUE = "generically-true"
    GENERICALLY_FALSE = "generically-false"


@dataclass(frozen=True)
class StackedNorm:
    """Largest observable share of a column of dPhi, scaled by 1 + its norm"""

    value: float

    def to_dict(self) -> dict[str, t.Any]:
        return {"kind": "stacked", "value": self.value}


@dataclass(frozen=True)
class TransferNorm:
    """Largest ``|lambda| |G(lambda)|`` over the sample points, scaled by 1 + |dPhi|"""

    value: float
    points: tuple[complex, ...] = ()

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "kind": "transfer",
            "value": self.value,
            "points": [[p.real, p.imag] for p in self.points],
        }


Evidence: t.TypeAlias = StackedNorm | TransferNorm


@dataclass(frozen=True)
class DistinguishabilityReport:
    verdict: Distinguishability
    evidence: Evidence
    tolerance_used: float

    @classmethod
    def from_evidence(cls, evidence: Evidence, tol: float) -> DistinguishabilityReport:
        verdict = (
            Distinguishability.DISTINGUISHABLE
            if evidence.value > tol
            else Distinguishability.INDISTINGUISHABLE
        )
        return cls(verdict, evidence, tol)

    @property
    def distinguishable(self) -> bool:
        return self.verdict is Distinguishability.DISTINGUISHABLE

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "verdict": str(self.verdict),
            "evidence": self.evidence.to_dict(),
            "tolerance_used": self.tolerance_used,
        }


@dataclass(frozen=True)
class IsolabilityReport:
    """Verdicts for every pair ``0 <= i < j <= r``, index 0 being the faultless system"""

    pairs: t.Mapping[Pair, DistinguishabilityReport]

    @property
    def failing_pairs(self) -> list[Pair]:
        return sorted(p for p, rep in self.pairs.items() if not rep.distinguishable)

    @property
    def isolable(self) -> bool:
        return not self.failing_pairs

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "isolable": self.isolable,
            "failing_pairs": [list(p) for p in self.failing_pairs],
            "pairs": {f"{i},{j}": rep.to_dict() for (i, j), rep in sorted(self.pairs.items())},
        }


@dataclass(frozen=True)
class GenericVerdict:
    """
    Outcome of sampling weight realizations. A single witness proves the
    property generically true. A false verdict only means no sample
    succeeded and is flagged as probabilistic.
    """

    verdict: Generic
    trials: int
    witnesses: tuple[int, ...]
    failing_pairs: tuple[Pair, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "witnesses", tuple(sorted(self.witnesses)))
        if self.verdict is Generic.GENERICALLY_TRUE and not self.witnesses:
            raise ValueError("A generically true verdict needs a witness")
        if self.verdict is Generic.GENERICALLY_FALSE and self.witnesses:
            raise ValueError("A generically false verdict cannot have witnesses")

    @property
    def holds(self) -> bool:
        return self.verdict is Generic.GENERICALLY_TRUE

    @property
    def probabilistic(self) -> bool:
        return not self.holds

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "verdict": str(self.verdict),
            "trials": self.trials,
            "witnesses": list(self.witnesses),
            "probabilistic": self.probabilistic,
            "failing_pairs": [list(p) for p in self.failing_pairs],
        }


@dataclass(frozen=True, eq=False)
class WitnessState:
    x0: Matrix
    seed: int
    draws: int
    margins: t.Mapping[Pair, float] = field(default_factory=dict)


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")


def _check_pair(phi_i: Matrix, phi_j: Matrix, q: Matrix) -> None:
    if phi_i.ndim != 2 or phi_i.shape[0] != phi_i.shape[1]:
        raise DimensionMismatchError(f"Phi must be square, got {phi_i.shape}")
    if phi_j.shape != phi_i.shape:
        raise DimensionMismatchError(
            f"State matrices differ in shape: {phi_i.shape} vs {phi_j.shape}"
        )
    if q.ndim != 2 or q.shape[1] != phi_i.shape[0]:
        raise DimensionMismatchError(
            f"Q must have {phi_i.shape[0]} columns, got shape {q.shape}"
        )


def _orth(m: Matrix, abs_tol: float) -> Matrix:
    if m.size == 0:
        return np.zeros((m.shape[0], 0))
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, s > abs_tol]


def unobservable_subspace(phi: Matrix, q: Matrix, tol: float = const.DEFAULT_TOL) -> Matrix:
    """
    Orthonormal basis (as columns) of the kernel of col{Q, Q Phi, ...,
    Q Phi^(n_x - 1)}. The observable subspace is grown as a block Krylov
    space of ``Phi^T`` from ``Q^T`` with rank decisions taken on SVDs, and
    the unobservable subspace is its orthogonal complement.
    """
    phi = np.asarray(phi, dtype=float)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n_x = phi.shape[0]
    if q.shape[1] != n_x:
        raise DimensionMismatchError(f"Q must have {n_x} columns, got shape {q.shape}")

    scale = max(1.0, float(np.linalg.norm(phi, 2)))
    basis = _orth(q.T, tol * max(1.0, float(np.linalg.norm(q, 2))))
    frontier = basis
    while frontier.shape[1] and basis.shape[1] < n_x:
        cand = phi.T @ frontier
        # Two projection passes keep the basis orthonormal to working precision
        cand -= basis @ (basis.T @ cand)
        cand -= basis @ (basis.T @ cand)
        frontier = _orth(cand, tol * scale)
        basis = np.hstack([basis, frontier])

    if basis.shape[1] == 0:
        return np.eye(n_x)
    if basis.shape[1] >= n_x:
        return np.zeros((n_x, 0))
    return sla.null_space(basis.T)


def _subspace_evidence(phi: Matrix, delta: Matrix, q: Matrix, tol: float) -> StackedNorm:
    if not np.any(delta):
        return StackedNorm(0.0)
    u = unobservable_subspace(phi, q, tol)
    residual = delta - u @ (u.T @ delta)
    col_norms = np.linalg.norm(delta, axis=0)
    res_norms = np.linalg.norm(residual, axis=0)
    return StackedNorm(float(np.max(res_norms / (1.0 + col_norms))))


def _stacked_evidence(phi: Matrix, delta: Matrix, q: Matrix) -> StackedNorm:
    n_x = phi.shape[0]
    q_scale = 1.0 + float(np.linalg.norm(q, 2))
    m = delta / (1.0 + float(np.linalg.norm(delta)))
    best = 0.0
    for _ in range(n_x):
        best = max(best, float(np.linalg.norm(q @ m)) / q_scale)
        m = phi @ m
        s = float(np.linalg.norm(m))
        if s == 0.0:
            break
        m = m / s
    return StackedNorm(best)


def stacked_check(
    phi_i: Matrix, phi_j: Matrix, q: Matrix, tol: float = const.DEFAULT_TOL
) -> DistinguishabilityReport:
    """
    Literal evaluation of col{Q dPhi, Q Phi_i dPhi, ...} with every power
    renormalized. Only reliable for small state dimensions.
    """
    _check_tol(tol)
    phi_i = np.asarray(phi_i, dtype=float)
    phi_j = np.asarray(phi_j, dtype=float)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    _check_pair(phi_i, phi_j, q)
    return DistinguishabilityReport.from_evidence(
        _stacked_evidence(phi_i, phi_i - phi_j, q), tol
    )


def _distinguish(phi: Matrix, delta: Matrix, q: Matrix, tol: float) -> DistinguishabilityReport:
    report = DistinguishabilityReport.from_evidence(
        _subspace_evidence(phi, delta, q, tol), tol
    )
    if np.any(delta) and phi.shape[0] <= const.STACKED_CHECK_LIMIT:
        stacked = DistinguishabilityReport.from_evidence(
            _stacked_evidence(phi, delta, q), tol
        )
        if stacked.verdict is not report.verdict:
            logger.warning(
                "Subspace and stacked evaluations disagree (%s with evidence %.3g vs %s with %.3g)",
                report.verdict,
                report.evidence.value,
                stacked.verdict,
                stacked.evidence.value,
            )
    return report


def is_distinguishable(
    phi_i: Matrix, phi_j: Matrix, q: Matrix, tol: float = const.DEFAULT_TOL
) -> DistinguishabilityReport:
    _check_tol(tol)
    phi_i = np.asarray(phi_i, dtype=float)
    phi_j = np.asarray(phi_j, dtype=float)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    _check_pair(phi_i, phi_j, q)
    return _distinguish(phi_i, phi_i - phi_j, q, tol)


def transfer_check(
    phi: Matrix,
    delta_phi: Matrix,
    q: Matrix,
    samples: int = const.DEFAULT_TRANSFER_SAMPLES,
    tol: float = const.DEFAULT_TOL,
    seed: int = 0,
) -> DistinguishabilityReport:
    """
    Evaluates ``Q (lI - Phi)^-1 dPhi`` at random complex points outside twice
    the spectral radius of ``Phi``.
    """
    _check_tol(tol)
    if samples < 1:
        raise ValueError(f"Expected at least one sample point, got {samples}")
    phi = np.asarray(phi, dtype=float)
    delta = np.asarray(delta_phi, dtype=float)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    _check_pair(phi, delta, q)

    if not np.any(delta):
        return DistinguishabilityReport.from_evidence(TransferNorm(0.0), tol)

    rng = np.random.default_rng(seed)
    radius = 2.0 * float(np.max(np.abs(np.linalg.eigvals(phi)), initial=0.0)) + 1.0
    eye = np.eye(phi.shape[0])
    scale = 1.0 + float(np.linalg.norm(delta))

    best = 0.0
    points: list[complex] = []
    for _ in range(samples):
        for _attempt in range(const.MAX_SOLVE_RETRIES):
            lam = rng.uniform(1.05, 2.0) * radius * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
            try:
                x = sla.solve(lam * eye - phi, delta.astype(complex))
            except (sla.LinAlgError, ValueError):
                logger.debug("Solve failed at lambda=%s, redrawing", lam)
                continue
            g = q @ x
            if np.all(np.isfinite(g)):
                break
        else:
            raise SolveError(
                f"Could not evaluate the transfer matrix after {const.MAX_SOLVE_RETRIES} draws"
            )
        points.append(complex(lam))
        best = max(best, float(np.max(np.abs(g))) * abs(lam) / scale)

    return DistinguishabilityReport.from_evidence(TransferNorm(best, tuple(points)), tol)


def _scenario_weights(weights: WeightRealization, failure_set: FailureSet, i: int) -> WeightRealization:
    if i == 0:
        return weights
    return weights.without(failure_set.edges_of(i))


def is_detectable(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure: FailureScenario,
    weights: WeightRealization,
    tol: float = const.DEFAULT_TOL,
) -> DistinguishabilityReport:
    """Compares the faultless realization with the one where ``failure`` zeroed its edges"""
    _check_tol(tol)
    failure.validate_for(model)
    sensors = model.require_sensors()

    nominal = assemble_lumped(dyn, weights, sensors)
    delta = delta_phi(weights, weights.without(failure.removed_edges), dyn)
    return _distinguish(nominal.Phi, delta, nominal.Q, tol)


def is_isolable(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure_set: FailureSet,
    weights: WeightRealization,
    tol: float = const.DEFAULT_TOL,
) -> IsolabilityReport:
    _check_tol(tol)
    failure_set.validate_for(model)
    sensors = model.require_sensors()

    realized = [_scenario_weights(weights, failure_set, i) for i in range(failure_set.r + 1)]
    lumped: dict[int, LumpedRealization] = {}

    reports: dict[Pair, DistinguishabilityReport] = {}
    for i, j in failure_set.pairs():
        if i not in lumped:
            lumped[i] = assemble_lumped(dyn, realized[i], sensors)
        delta = delta_phi(realized[i], realized[j], dyn)
        reports[(i, j)] = _distinguish(lumped[i].Phi, delta, lumped[i].Q, tol)
    return IsolabilityReport(reports)


def certify_initial_state(
    phis: t.Sequence[Matrix], q: Matrix, x0: Matrix, tol: float = const.DEFAULT_TOL
) -> dict[Pair, float]:
    """
    For every pair of state matrices, the largest relative size of
    ``Q (Phi_i^k - Phi_j^k) x0`` over ``k = 1..2 n_x - 1``. A pair is
    certified when its margin exceeds ``tol``.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    n_x = x0.shape[0]
    q_norm = max(float(np.linalg.norm(q, 2)), np.finfo(float).tiny)

    margins: dict[Pair, float] = {}
    for i in range(len(phis)):
        for j in range(i + 1, len(phis)):
            a, b = x0.copy(), x0.copy()
            best = 0.0
            for _ in range(2 * n_x - 1):
                a = phis[i] @ a
                b = phis[j] @ b
                s = float(np.linalg.norm(a) + np.linalg.norm(b))
                if s == 0.0:
                    break
                best = max(best, float(np.linalg.norm(q @ (a - b))) / (q_norm * s))
                # Same factor on both sides keeps the difference direction
                a, b = a / s, b / s
            margins[(i, j)] = best
    return margins


def witness_initial_state(
    phis: t.Sequence[Matrix],
    q: Matrix,
    seed: int = 0,
    tol: float = const.DEFAULT_TOL,
) -> WitnessState:
    """
    Draws a unit-norm initial state that makes every pair of systems produce
    different outputs. Fails fast when some pair is indistinguishable since
    no such state exists then.
    """
    _check_tol(tol)
    if len(phis) < 2:
        raise ValueError("Need at least two systems to separate")
    q = np.atleast_2d(np.asarray(q, dtype=float))
    for i in range(len(phis)):
        for j in range(i + 1, len(phis)):
            if not is_distinguishable(phis[i], phis[j], q, tol).distinguishable:
                raise PreconditionError(
                    f"Systems {i} and {j} are indistinguishable, no initial state separates them",
                    pair=(i, j),
                )

    rng = np.random.default_rng(seed)
    n_x = phis[0].shape[0]
    for draw in range(1, const.MAX_WITNESS_DRAWS + 1):
        x0 = rng.standard_normal(n_x)
        x0 /= np.linalg.norm(x0)
        margins = certify_initial_state(phis, q, x0, tol)
        if all(m > tol for m in margins.values()):
            return WitnessState(x0, seed, draw, margins)
        logger.debug("Draw %d of seed %d failed certification: %s", draw, seed, margins)

    raise SolveError(
        f"No certified initial state after {const.MAX_WITNESS_DRAWS} draws with seed {seed}"
    )


def generic_detectable_mc(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure: FailureScenario,
    trials: int = const.DEFAULT_TRIALS,
    tol: float = const.DEFAULT_TOL,
    seed: int = const.DEFAULT_SEED,
) -> GenericVerdict:
    """Trial ``t`` samples its weights with seed ``seed + t``"""
    if trials < 1:
        raise ValueError(f"Expected at least one trial, got {trials}")

    witnesses = [
        seed + k
        for k in range(trials)
        if is_detectable(dyn, model, failure, sample_weights(model, seed + k), tol).distinguishable
    ]
    if witnesses:
        return GenericVerdict(Generic.GENERICALLY_TRUE, trials, tuple(witnesses))
    return GenericVerdict(Generic.GENERICALLY_FALSE, trials, (), failing_pairs=((0, 1),))


def generic_isolable_mc(
    dyn: SubsystemDynamics,
    model: NetworkModel,
    failure_set: FailureSet,
    trials: int = const.DEFAULT_TRIALS,
    tol: float = const.DEFAULT_TOL,
    seed: int = const.DEFAULT_SEED,
) -> GenericVerdict:
    """
    As :func:`generic_detectable_mc` over the whole set. ``failing_pairs``
    lists the pairs that no trial could separate.
    """
    if trials < 1:
        raise ValueError(f"Expected at least one trial, got {trials}")

    witnesses: list[int] = []
    never_separated: set[Pair] | None = None
    for k in range(trials):
        report = is_isolable(dyn, model, failure_set, sample_weights(model, seed + k), tol)
        if report.isolable:
            witnesses.append(seed + k)
        failing = set(report.failing_pairs)
        never_separated = failing if never_separated is None else never_separated & failing

    if witnesses:
        return GenericVerdict(Generic.GENERICALLY_TRUE, trials, tuple(witnesses))
    return GenericVerdict(
        Generic.GENERICALLY_FALSE,
        trials,
        (),
        failing_pairs=tuple(sorted(never_separated or ())),
    )
