"""
The ``netdiag`` command line. Every subcommand takes a network description,
either a bundled fixture name (``example1``, ``example2``, ``ieee9``) or a
path to a JSON file, prints a JSON verdict document on stdout and a short
summary on stderr.

Exit codes: 0 success, 2 invalid input, 3 structural and algebraic verdicts
disagree, 4 infeasible placement.
"""

from __future__ import annotations

import asyncio
import builtins
import json
import logging
import sys
import typing as t
from pathlib import Path

import clypi
from clypi import Command, config
from typing_extensions import override

from netdiag import const
from netdiag._util import parse_nodes
from netdiag.algebraic import generic_detectable_mc, generic_isolable_mc
from netdiag.config import AnalysisConfig, configure_logging
from netdiag.description import NetworkDescription
from netdiag.errors import InfeasiblePlacementError, NetdiagError, SearchLimitError
from netdiag.placement import (
    build_detect_instance,
    build_isolate_instance,
    detect_sensor_locations,
    exact_hitting_set,
    greedy_hitting_set,
)
from netdiag.sim import (
    detection_time,
    export_csv,
    propagate,
    random_initial_state,
    residual,
    uniform_grid,
    write_metadata,
)
from netdiag.structural import (
    disjoint_isolability_shortcut,
    generically_detectable,
    generically_isolable,
    subset_nonisolability_screen,
    transfer_index,
)
from netdiag.sysmodel import assemble_lumped, realize_pattern, sample_weights

if t.TYPE_CHECKING:
    from clypi.colors import ColorType

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DISAGREE = 3
EXIT_INFEASIBLE = 4

SUMMARY_WIDTH = 72

DETECT_TARGET_NOTE = (
    "Each detection target contains its receiving node: a sensor on the "
    "ending node of a failed link detects the failure. See docs/conventions.md."
)

_DESCRIPTION_HELP = "Bundled fixture name or path to a JSON network description"


def _jsonable(value: t.Any) -> t.Any:
    if isinstance(value, frozenset | set):
        return sorted(value)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    return value


def _emit(document: dict[str, t.Any]) -> None:
    builtins.print(json.dumps(document, indent=2, sort_keys=True))


def _summary(title: str, lines: list[str], color: ColorType) -> None:
    box = clypi.boxed(lines, width=SUMMARY_WIDTH, title=title, color=color)
    builtins.print("\n".join(box), file=sys.stderr)


def _error_lines(err: BaseException) -> list[str]:
    chain: list[BaseException] = [err]
    while chain[-1].__cause__ is not None:
        chain.append(chain[-1].__cause__)
    return [clypi.style(str(e), fg="red") for e in chain]


def _verdict_color(ok: bool) -> ColorType:
    return "green" if ok else "yellow"


class _NetdiagCommand(Command):
    """
    Runs :meth:`execute` and turns library errors into exit codes. Fields
    must be declared on each subcommand.
    """

    async def execute(self) -> int:
        raise NotImplementedError

    @override
    async def run(self) -> int:
        try:
            return await self.execute()
        except InfeasiblePlacementError as e:
            _summary("infeasible", _error_lines(e), "red")
            return EXIT_INFEASIBLE
        except (NetdiagError, ValueError) as e:
            _summary("error", _error_lines(e), "red")
            return EXIT_INVALID

    def _echo(self) -> dict[str, t.Any]:
        args = {name: _jsonable(getattr(self, name)) for name in type(self).fields()}
        return {"name": self.prog(), "arguments": args}

    def _load(self, value: str, sensors: frozenset[int] | None) -> NetworkDescription:
        desc = NetworkDescription.resolve(value)
        if sensors is not None:
            desc = desc.with_sensors(sensors)
        return desc


class Rmax(_NetdiagCommand):
    """Computes the transfer index of the subsystem dynamics"""

    description: str = config(help=_DESCRIPTION_HELP)
    tol: float = config(default=const.DEFAULT_TOL, help="Numerical zero threshold")
    seed: int = config(default=const.DEFAULT_SEED, help="Seed for the sample points")

    @override
    async def execute(self) -> int:
        desc = NetworkDescription.resolve(self.description)
        r_max = transfer_index(desc.dynamics, self.tol, self.seed)
        builtins.print(f"r_max = {r_max}")
        _summary(
            "rmax",
            [f"r_max = {r_max} (certified by {r_max.certified_by})"],
            "cyan",
        )
        return EXIT_OK


class Detect(_NetdiagCommand):
    """
    Decides generic detectability of one failure, or of every failure in the
    description when none is named, both structurally and by sampling
    """

    description: str = config(help=_DESCRIPTION_HELP)
    failure: str | None = config(default=None, help="Name of the failure to check")
    sensors: frozenset[int] | None = config(
        default=None, parser=parse_nodes, help="Comma separated sensor nodes"
    )
    trials: int = config(default=const.DEFAULT_TRIALS, help="Sampled realizations")
    seed: int = config(default=const.DEFAULT_SEED, help="Seed of the first trial")
    tol: float = config(default=const.DEFAULT_TOL, help="Numerical zero threshold")

    @override
    async def execute(self) -> int:
        cfg = AnalysisConfig(tol=self.tol, trials=self.trials, seed=self.seed)
        desc = self._load(self.description, self.sensors)
        if self.failure is not None:
            failures = [desc.failure(self.failure)]
        else:
            failures = list(desc.failures.values())
        if not failures:
            raise NetdiagError("The description lists no failure to check")

        r_max = transfer_index(desc.dynamics, cfg.tol, cfg.seed)
        results: list[dict[str, t.Any]] = []
        lines: list[str] = []
        for failure in failures:
            structural = generically_detectable(desc.dynamics, desc.model, failure, r_max)
            sampled = generic_detectable_mc(
                desc.dynamics, desc.model, failure, cfg.trials, cfg.tol, cfg.seed
            )
            agree = structural.holds == sampled.holds
            if not agree:
                logger.warning(
                    "Verdicts disagree on %s: structural %s, sampled %s (seeds %d..%d)",
                    failure.label,
                    structural.verdict,
                    sampled.verdict,
                    cfg.seed,
                    cfg.seed + cfg.trials - 1,
                )
            results.append(
                {
                    "failure": failure.label,
                    "edges": [list(e) for e in sorted(failure.removed_edges)],
                    "structural": structural.to_dict(),
                    "algebraic": sampled.to_dict(),
                    "agree": agree,
                }
            )
            lines.append(
                f"{failure.label:<10} {structural.verdict:<26} "
                + clypi.style(str(sampled.verdict), fg=_verdict_color(agree))
            )

        all_agree = all(r["agree"] for r in results)
        _emit(
            {
                "command": self._echo(),
                "config": cfg.to_dict(),
                "sensors": sorted(desc.model.sensors),
                "r_max": r_max.to_dict(),
                "results": results,
                "agree": all_agree,
            }
        )
        _summary(f"detect r_max={r_max}", lines, _verdict_color(all_agree))
        return EXIT_OK if all_agree else EXIT_DISAGREE


class Isolate(_NetdiagCommand):
    """
    Decides generic isolability of a failure set, by default the one the
    description defines
    """

    description: str = config(help=_DESCRIPTION_HELP)
    set: list[str] = config(default_factory=list, help="Names of the failures in the set")
    sensors: frozenset[int] | None = config(
        default=None, parser=parse_nodes, help="Comma separated sensor nodes"
    )
    trials: int = config(default=const.DEFAULT_TRIALS, help="Sampled realizations")
    seed: int = config(default=const.DEFAULT_SEED, help="Seed of the first trial")
    tol: float = config(default=const.DEFAULT_TOL, help="Numerical zero threshold")

    @override
    async def execute(self) -> int:
        cfg = AnalysisConfig(tol=self.tol, trials=self.trials, seed=self.seed)
        desc = self._load(self.description, self.sensors)
        failure_set = desc.failure_set(self.set or None)
        dyn, model = desc.dynamics, desc.model

        r_max = transfer_index(dyn, cfg.tol, cfg.seed)
        structural = disjoint_isolability_shortcut(dyn, model, failure_set, r_max)
        if structural is None:
            structural = generically_isolable(dyn, model, failure_set, r_max)
        screen = subset_nonisolability_screen(dyn, model, failure_set, r_max)
        sampled = generic_isolable_mc(dyn, model, failure_set, cfg.trials, cfg.tol, cfg.seed)

        agree = structural.holds == sampled.holds
        if not agree:
            logger.warning(
                "Verdicts disagree: structural %s, sampled %s (seeds %d..%d)",
                structural.verdict,
                sampled.verdict,
                cfg.seed,
                cfg.seed + cfg.trials - 1,
            )

        document: dict[str, t.Any] = {
            "command": self._echo(),
            "config": cfg.to_dict(),
            "sensors": sorted(model.sensors),
            "scenarios": [failure_set.label(i) for i in range(failure_set.r + 1)],
            "r_max": r_max.to_dict(),
            "structural": structural.to_dict(),
            "algebraic": sampled.to_dict(),
            "agree": agree,
        }
        if screen is not None:
            document["subset_counterexample"] = screen.to_dict()
        _emit(document)

        lines = [
            f"route: {structural.route}",
            f"structural: {structural.verdict} (worst distance {structural.distance})",
            "sampled: " + clypi.style(str(sampled.verdict), fg=_verdict_color(agree)),
        ]
        if structural.failing_pair is not None:
            i, j = structural.failing_pair
            lines.append(
                f"first failing pair: {failure_set.label(i)} vs {failure_set.label(j)}"
            )
        _summary(f"isolate r_max={r_max}", lines, _verdict_color(agree))
        return EXIT_OK if agree else EXIT_DISAGREE


class Place(_NetdiagCommand):
    """Finds a small sensor set making every failure detectable or the failure set isolable"""

    description: str = config(help=_DESCRIPTION_HELP)
    mode: t.Literal["detect", "isolate"] = config(
        default="detect", help="Place for detection of every failure or for isolation"
    )
    set: list[str] = config(default_factory=list, help="Failure set for isolation mode")
    candidates: frozenset[int] | None = config(
        default=None, parser=parse_nodes, help="Nodes allowed to host a sensor"
    )
    exact_limit: int = config(
        default=const.DEFAULT_EXACT_LIMIT,
        help="Largest candidate count for the exhaustive search",
    )
    seed: int = config(default=const.DEFAULT_SEED, help="Seed for the transfer index")
    tol: float = config(default=const.DEFAULT_TOL, help="Numerical zero threshold")

    @override
    async def execute(self) -> int:
        cfg = AnalysisConfig(tol=self.tol, seed=self.seed, exact_limit=self.exact_limit)
        desc = NetworkDescription.resolve(self.description)
        dyn, model = desc.dynamics, desc.model

        r_max = transfer_index(dyn, cfg.tol, cfg.seed)
        if self.mode == "detect":
            instance = build_detect_instance(dyn, model, r_max)
        else:
            instance = build_isolate_instance(dyn, model, desc.failure_set(self.set or None), r_max)
        if self.candidates is not None:
            instance = instance.restricted_to(self.candidates)

        greedy = greedy_hitting_set(instance)
        document: dict[str, t.Any] = {
            "command": self._echo(),
            "config": cfg.to_dict(),
            "mode": self.mode,
            "r_max": r_max.to_dict(),
            "instance": instance.to_dict(),
            "greedy": greedy.to_dict(),
        }
        lines = [f"greedy: {list(greedy.sensors)} (bound {greedy.bound:.3f})"]
        try:
            exact = exact_hitting_set(instance, cfg.exact_limit)
        except SearchLimitError as e:
            logger.info("Skipping the exhaustive search: %s", e)
            document["exact"] = None
            lines.append("exact: skipped")
        else:
            document["exact"] = exact.to_dict()
            ratio = len(greedy.sensors) / len(exact.sensors) if exact.sensors else 1.0
            document["ratio"] = ratio
            lines.append(f"exact:  {list(exact.sensors)} (ratio {ratio:.3f})")
        if self.mode == "detect":
            allowed = self.candidates if self.candidates is not None else frozenset(model.nodes)
            document["single_sensor_locations"] = {
                name: sorted(detect_sensor_locations(dyn, model, failure, r_max) & allowed)
                for name, failure in desc.failures.items()
            }
            document["note"] = DETECT_TARGET_NOTE

        _emit(document)
        _summary(f"place {self.mode} r_max={r_max}", lines, "green")
        return EXIT_OK


class Simulate(_NetdiagCommand):
    """
    Simulates the faultless network and the named failures from one random
    initial state. With ``--noise-std`` and ``--threshold`` also reports the
    first detection time for every sensor set given with ``--sensors``.
    """

    description: str = config(help=_DESCRIPTION_HELP)
    failures: list[str] = config(default_factory=list, help="Failures to simulate")
    sensors: list[str] = config(
        default_factory=list,
        help="Sensor sets to compare, each comma separated (e.g. 4 4,3)",
    )
    weights: t.Literal["sampled", "nominal"] = config(
        default="sampled", help="Sample free weights or use their nominal values"
    )
    seed: int = config(default=const.DEFAULT_SEED, help="Seed for weights, state and noise")
    horizon: float = config(default=const.DEFAULT_HORIZON, help="Simulated time span")
    steps: int = config(default=const.DEFAULT_STEPS, help="Number of time steps")
    noise_std: float | None = config(default=None, help="Measurement noise level")
    threshold: float | None = config(default=None, help="Detection threshold")
    out: Path | None = config(default=None, help="CSV file for the trajectories")

    @override
    async def execute(self) -> int:
        if (self.noise_std is None) != (self.threshold is None):
            raise ValueError("--noise-std and --threshold must be given together")
        cfg = AnalysisConfig(seed=self.seed, horizon=self.horizon, steps=self.steps)
        desc = NetworkDescription.resolve(self.description)
        dyn, model = desc.dynamics, desc.model
        failures = [desc.failure(name) for name in self.failures]

        sensor_sets = [parse_nodes(s) for s in self.sensors] or [model.require_sensors()]
        observed = sorted(frozenset().union(*sensor_sets))

        if self.weights == "nominal" or model.is_fully_fixed:
            weights = realize_pattern(model)
        else:
            weights = sample_weights(model, cfg.seed)

        grid = uniform_grid(cfg.horizon, cfg.steps)
        x0 = random_initial_state(model.node_count * dyn.n, cfg.seed)
        runs = [("nominal", weights)] + [(f.label, weights.without(f.removed_edges)) for f in failures]
        trajectories = await asyncio.gather(
            *(
                asyncio.to_thread(propagate, assemble_lumped(dyn, w, observed), x0, grid, label)
                for label, w in runs
            )
        )
        nominal, faulty = trajectories[0], trajectories[1:]

        document: dict[str, t.Any] = {
            "command": self._echo(),
            "config": cfg.to_dict(),
            "weights": self.weights,
            "initial_state": x0.tolist(),
            "channels": nominal.channel_names,
            "residuals": {},
        }
        lines: list[str] = []
        for traj in faulty:
            res = residual(nominal, traj)
            document["residuals"][traj.label] = {"sup": res.sup, "relative_sup": res.relative_sup}
            lines.append(f"{traj.label:<10} sup residual {res.sup:.4g}")

        if self.noise_std is not None and self.threshold is not None:
            detections: list[dict[str, t.Any]] = []
            for traj in faulty:
                for sensors in sensor_sets:
                    channels = [c for c in nominal.channels if c.node in sensors]
                    experiment = detection_time(
                        nominal.select(channels),
                        traj.select(channels),
                        self.noise_std,
                        self.threshold,
                        cfg.seed,
                    )
                    detections.append(
                        {"failure": traj.label, "sensors": sorted(sensors), **experiment.to_dict()}
                    )
                    when = experiment.first_detection_time
                    lines.append(
                        f"{traj.label:<10} sensors {sorted(sensors)}: "
                        + ("not detected" if when is None else f"detected at t={when:.4g}")
                    )
            document["detection"] = detections

        if self.out is not None:
            csv_path = export_csv(trajectories, self.out)
            meta_path = write_metadata(
                csv_path,
                {
                    "description": desc.to_dict(),
                    "weights": weights.W.tolist(),
                    "weight_provenance": weights.counts(),
                    "initial_state": x0.tolist(),
                    "config": cfg.to_dict(),
                    "scenarios": [label for label, _ in runs],
                },
            )
            document["csv"] = str(csv_path)
            document["metadata"] = str(meta_path)
            lines.append(f"wrote {csv_path}")

        _emit(document)
        _summary("simulate", lines or ["nominal trajectory only"], "cyan")
        return EXIT_OK


class Netdiag(Command):
    """
    Detectability, isolability and sensor placement for topology failures
    in networked linear systems
    """

    subcommand: Rmax | Detect | Isolate | Place | Simulate


def main(argv: t.Sequence[str] | None = None) -> int:
    configure_logging()
    try:
        cli = Netdiag.parse(argv)
    except SystemExit as e:
        # Parse errors print the help page and exit with 1, help requests with 0
        if e.code in (0, None):
            return EXIT_OK
        return EXIT_INVALID
    except ValueError as e:
        _summary("error", _error_lines(e), "red")
        return EXIT_INVALID
    return t.cast(int, asyncio.run(cli.astart()))


if __name__ == "__main__":
    sys.exit(main())
