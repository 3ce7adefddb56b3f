from __future__ import annotations

import logging
import os
import sys
import typing as t
from dataclasses import asdict, dataclass

from netdiag import const


@dataclass(frozen=True)
class AnalysisConfig:
    """
    Numeric knobs shared by every analysis. The defaults are recorded in each
    output document so results can be reproduced.
    """

    tol: float = const.DEFAULT_TOL
    trials: int = const.DEFAULT_TRIALS
    seed: int = const.DEFAULT_SEED
    transfer_samples: int = const.DEFAULT_TRANSFER_SAMPLES
    horizon: float = const.DEFAULT_HORIZON
    steps: int = const.DEFAULT_STEPS
    exact_limit: int = const.DEFAULT_EXACT_LIMIT

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tol}")
        if self.trials < 1:
            raise ValueError(f"Expected at least one trial, got {self.trials}")
        if self.transfer_samples < 1:
            raise ValueError("Expected at least one transfer sample")
        if self.horizon <= 0 or self.steps < 1:
            raise ValueError("Simulation horizon and step count must be positive")

    def to_dict(self) -> dict[str, t.Any]:
        return asdict(self)


def configure_logging(level: str | None = None) -> None:
    """
    Sends library logs to stderr. The level comes from ``level`` or the
    NETDIAG_LOG_LEVEL environment variable and defaults to WARNING.
    """
    name = (level or os.environ.get(const.LOG_LEVEL_ENV) or "WARNING").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.WARNING

    logging.basicConfig(
        stream=sys.stderr,
        level=numeric,
        format="%(levelname)s %(name)s: %(message)s",
    )
