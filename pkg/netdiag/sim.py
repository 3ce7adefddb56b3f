"""
Time-domain simulation of the lumped system: output trajectories of the
faultless and failed networks, their residuals, and detection of a failure
from noisy measurements with a fixed threshold.
"""

from __future__ import annotations

import csv
import json
import logging
import typing as t
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from netdiag import const
from netdiag.errors import ExportError, TrajectoryMismatchError
from netdiag.netgraph import FailureScenario
from netdiag.sysmodel import (
    Channel,
    LumpedRealization,
    Matrix,
    SubsystemDynamics,
    WeightRealization,
    assemble_lumped,
)

logger = logging.getLogger(__name__)

NOMINAL_LABEL = "nominal"
DECISION_RULE = "distinguishable at t when ||y(t) - y_nominal(t)||_2 > threshold"


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: Matrix
    outputs: Matrix
    label: str
    initial_state: Matrix
    channels: tuple[Channel, ...] = ()
    final_state: Matrix | None = None

    @property
    def channel_names(self) -> list[str]:
        return [c.name for c in self.channels]

    def select(self, channels: t.Iterable[Channel]) -> Trajectory:
        """Keeps only the given output channels, in the given order"""
        wanted = list(channels)
        try:
            cols = [self.channels.index(c) for c in wanted]
        except ValueError as e:
            raise TrajectoryMismatchError(
                f"Trajectory {self.label!r} does not carry all of {[c.name for c in wanted]}"
            ) from e
        return Trajectory(
            self.times,
            self.outputs[:, cols],
            self.label,
            self.initial_state,
            tuple(wanted),
            self.final_state,
        )


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    norms: Matrix
    sup: float
    relative_sup: float
    """``sup`` divided by the largest output norm seen on either trajectory"""

    def first_exceeding(self, threshold: float) -> int | None:
        hits = np.flatnonzero(self.norms > threshold)
        return int(hits[0]) if hits.size else None


@dataclass(frozen=True)
class DetectionExperiment:
    noise_std: float
    threshold: float
    seed: int
    first_detection_time: float | None
    first_detection_index: int | None = None
    decision_rule: str = DECISION_RULE

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "noise_std": self.noise_std,
            "threshold": self.threshold,
            "seed": self.seed,
            "first_detection_time": self.first_detection_time,
        }


def uniform_grid(horizon: float = const.DEFAULT_HORIZON, steps: int = const.DEFAULT_STEPS) -> Matrix:
    if horizon <= 0 or steps < 1:
        raise ValueError(f"Invalid grid: horizon={horizon}, steps={steps}")
    return np.linspace(0.0, horizon, steps + 1)


def random_initial_state(n_x: int, seed: int) -> Matrix:
    x0 = np.random.default_rng(seed).standard_normal(n_x)
    return x0 / np.linalg.norm(x0)


def _check_grid(grid: Matrix) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("The time grid must be a non-empty 1-D array")
    if grid[0] != 0.0:
        raise ValueError(f"The time grid must start at 0, got {grid[0]}")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("The time grid must be strictly increasing")


def propagate(
    lumped: LumpedRealization,
    x0: Matrix,
    grid: Matrix,
    label: str = NOMINAL_LABEL,
) -> Trajectory:
    """
    Advances ``x0`` along the grid with one matrix exponential per distinct
    step length. Stops early with a warning if the state stops being finite.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    grid = np.asarray(grid, dtype=float)
    if x0.shape[0] != lumped.dims.n_x:
        raise TrajectoryMismatchError(
            f"Initial state has {x0.shape[0]} entries, the system has {lumped.dims.n_x} states"
        )
    _check_grid(grid)

    propagators: dict[float, Matrix] = {}
    outputs = [lumped.Q @ x0]
    x = x0
    last = 0
    for k, dt in enumerate(np.diff(grid), start=1):
        # Steps of a linspace grid differ in the last bits only
        key = float(np.round(dt, 12))
        if key not in propagators:
            propagators[key] = sla.expm(lumped.Phi * key)
        x_next = propagators[key] @ x
        if not np.all(np.isfinite(x_next)):
            logger.warning(
                "State of %r stopped being finite at t=%.6g, truncating the trajectory",
                label,
                grid[k],
            )
            break
        x = x_next
        outputs.append(lumped.Q @ x)
        last = k

    return Trajectory(
        times=grid[: last + 1],
        outputs=np.vstack(outputs),
        label=label,
        initial_state=x0,
        channels=lumped.channels,
        final_state=x,
    )


def _check_matched(a: Trajectory, b: Trajectory) -> None:
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise TrajectoryMismatchError(
            f"Trajectories {a.label!r} and {b.label!r} use different time grids"
        )
    if a.outputs.shape != b.outputs.shape:
        raise TrajectoryMismatchError(
            f"Trajectories {a.label!r} and {b.label!r} have different output channels"
        )
    if not np.array_equal(a.initial_state, b.initial_state):
        raise TrajectoryMismatchError(
            f"Trajectories {a.label!r} and {b.label!r} start from different states"
        )


def residual(traj_a: Trajectory, traj_b: Trajectory) -> ResidualSeries:
    _check_matched(traj_a, traj_b)
    norms = np.linalg.norm(traj_a.outputs - traj_b.outputs, axis=1)
    scale = max(
        float(np.max(np.linalg.norm(traj_a.outputs, axis=1))),
        float(np.max(np.linalg.norm(traj_b.outputs, axis=1))),
    )
    sup = float(np.max(norms))
    return ResidualSeries(norms, sup, sup / scale if scale > 0 else 0.0)


def channel_noise(
    channel: Channel, samples: int, noise_std: float, seed: int
) -> Matrix:
    """
    Measurement noise of one channel. The stream depends only on the seed
    and the channel, so a sensor sees the same noise whatever other sensors
    are deployed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, channel.node, channel.row]))
    return rng.normal(0.0, noise_std, size=samples)


def detection_time(
    nominal: Trajectory,
    faulty: Trajectory,
    noise_std: float,
    threshold: float,
    seed: int,
) -> DetectionExperiment:
    """
    Adds Gaussian noise to the faulty outputs and returns the first grid
    instant where they leave the noiseless nominal outputs by more than
    ``threshold``.
    """
    _check_matched(nominal, faulty)
    if noise_std < 0:
        raise ValueError(f"Noise level must be non-negative, got {noise_std}")
    if threshold <= 0:
        raise ValueError(f"Threshold must be positive, got {threshold}")

    measured = faulty.outputs.copy()
    if noise_std > 0:
        samples = measured.shape[0]
        for col, channel in enumerate(faulty.channels):
            measured[:, col] += channel_noise(channel, samples, noise_std, seed)

    deviation = np.linalg.norm(measured - nominal.outputs, axis=1)
    hits = np.flatnonzero(deviation > threshold)
    if not hits.size:
        return DetectionExperiment(noise_std, threshold, seed, None)
    k = int(hits[0])
    return DetectionExperiment(noise_std, threshold, seed, float(nominal.times[k]), k)


def simulate_scenarios(
    dyn: SubsystemDynamics,
    weights: WeightRealization,
    sensors: t.Iterable[int],
    failures: t.Sequence[FailureScenario],
    x0: Matrix,
    grid: Matrix,
) -> list[Trajectory]:
    """The nominal trajectory followed by one per failure, all from ``x0``"""
    sensors = sorted(set(sensors))
    runs: list[tuple[str, WeightRealization]] = [(NOMINAL_LABEL, weights)]
    runs += [(f.label, weights.without(f.removed_edges)) for f in failures]
    return [propagate(assemble_lumped(dyn, w, sensors), x0, grid, label) for label, w in runs]


def _fmt(value: float) -> str:
    return np.format_float_positional(
        value, precision=9, unique=False, fractional=False, trim="-"
    )


def export_csv(trajectories: t.Sequence[Trajectory], path: Path | str) -> Path:
    """
    Writes one row per instant: the time, then every channel of every
    trajectory in order, headed ``label:channel``.
    """
    path = Path(path)
    header = ["time"]
    for traj in trajectories:
        header += [f"{traj.label}:{name}" for name in traj.channel_names]

    if trajectories:
        first = trajectories[0]
        for other in trajectories[1:]:
            if not np.array_equal(first.times, other.times):
                raise TrajectoryMismatchError(
                    f"Cannot tabulate {first.label!r} and {other.label!r} on one time axis"
                )

    try:
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            if trajectories:
                table = np.hstack([trajectories[0].times[:, None], *[tr.outputs for tr in trajectories]])
                writer.writerows([_fmt(v) for v in row] for row in table)
    except OSError as e:
        raise ExportError(f"Could not write trajectories to {path}: {e.strerror or e}") from e
    return path


def metadata_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_metadata(path: Path | str, metadata: t.Mapping[str, t.Any]) -> Path:
    """Writes the companion ``<csv>.meta.json`` next to ``path``"""
    target = metadata_path(path)
    try:
        target.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise ExportError(f"Could not write metadata to {target}: {e.strerror or e}") from e
    return target
