"""Nonparametric subject bootstrap for mediation reports.

Subjects are resampled with replacement and keep their whole trajectory,
which serves both horizons: finite-horizon subjects are independent units
and infinite-horizon trajectories are resampled as blocks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from dynmediation.errors import BootstrapFailure, ConfigError, MediationError
from dynmediation.model import MediationReport, Panel

logger = logging.getLogger(__name__)

Estimator = Callable[[Panel], MediationReport]

QUANTITIES = ("eta", "iime", "dime", "delta")
MAX_FAILURE_SHARE = 0.10


@dataclass(frozen=True)
class BootstrapResult:
    """Per-quantity SE and percentile interval arrays, each shaped like the report."""
    se: dict[str, np.ndarray]
    lower: dict[str, np.ndarray]
    upper: dict[str, np.ndarray]
    reps: int
    failed: int
    level: float

    def covers(self, quantity: str, truth: np.ndarray) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (self.lower[quantity] <= truth) & (truth <= self.upper[quantity])


def replicate_indices(n: int, seed: int, replicate: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))
    return rng.integers(0, n, size=n)


def bootstrap(
    panel: Panel,
    estimator: Estimator,
    reps: int,
    seed: int,
    level: float = 0.95,
) -> BootstrapResult:
    """Re-run ``estimator`` on ``reps`` resampled panels.

    A failing replicate is logged and skipped; more than 10% failures raise
    BootstrapFailure.
    """
    if reps < 2:
        raise ConfigError(f"bootstrap needs reps >= 2, got {reps}")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level}")

    draws: dict[str, list[np.ndarray]] = {q: [] for q in QUANTITIES}
    failed = 0
    for r in range(reps):
        resampled = panel.take_subjects(replicate_indices(panel.n, seed, r))
        try:
            report = estimator(resampled)
        except (MediationError, np.linalg.LinAlgError) as e:
            failed += 1
            logger.warning("Bootstrap replicate %d/%d failed: %s", r + 1, reps, e)
            continue
        for q in QUANTITIES:
            draws[q].append(getattr(report, q))

    if failed > MAX_FAILURE_SHARE * reps or reps - failed < 2:
        raise BootstrapFailure(failed, reps)

    tail = 100.0 * (1.0 - level) / 2.0
    stacked = {q: np.stack(values) for q, values in draws.items()}
    result = BootstrapResult(
        se={q: v.std(axis=0, ddof=1) for q, v in stacked.items()},
        lower={q: np.percentile(v, tail, axis=0) for q, v in stacked.items()},
        upper={q: np.percentile(v, 100.0 - tail, axis=0) for q, v in stacked.items()},
        reps=reps,
        failed=failed,
        level=level,
    )
    logger.info("Bootstrap finished: %d replicates, %d failed", reps, failed)
    return result


def bootstrap_se(panel: Panel, estimator: Estimator, reps: int, seed: int) -> dict[str, np.ndarray]:
    """Bootstrap standard errors of eta, iime, dime and delta."""
    return bootstrap(panel, estimator, reps, seed).se
