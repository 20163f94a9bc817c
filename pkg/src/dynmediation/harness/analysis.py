"""Finite-horizon analysis of an observed panel with smoothed trajectories."""
from __future__ import annotations

import functools
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from dynmediation.config import AnalysisConfig, SimSettings
from dynmediation.effects_finite import estimate_finite, treatment_to_mediator_decomposition
from dynmediation.harness.bootstrap import bootstrap
from dynmediation.harness.io import FLOAT_FORMAT, standardize_panel, write_report_csv
from dynmediation.harness.spline import smooth_columns
from dynmediation.messages import OutputFields
from dynmediation.model import MediationReport, Panel
from dynmediation.simulator import SimConfig, sample_params

logger = logging.getLogger(__name__)

REPORT_FILE = "report.csv"
TRAJECTORY_FILE = "trajectories.csv"
SUMMARY_FILE = "summary.json"

# shape of the weekly mobile-health cohort the analysis was designed for
IHS_SHAPE = {"n": 1196, "T": 26, "d": 4}

TRAJECTORY_SERIES = (OutputFields.IIME, OutputFields.DIME, OutputFields.IMMEDIATE, OutputFields.DELAYED)


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    report: MediationReport
    trajectories: pd.DataFrame
    files: tuple[Path, ...] = ()


def ihs_like_config(seed: int, n: int = IHS_SHAPE["n"]) -> SimConfig:
    """Synthetic panel configuration with the shape of the weekly cohort study."""
    T, d = IHS_SHAPE["T"], IHS_SHAPE["d"]
    settings = SimSettings(n=n, T=T, d=d, param_seed=seed)
    params = sample_params(d, T, time_varying=True, seed=seed, edge_prob=settings.edge_prob)
    return SimConfig.from_settings(settings, params, seed + 1)


def treatment_series(report: MediationReport) -> tuple[np.ndarray, np.ndarray]:
    """[T, d] immediate and delayed effects of the treatments on each mediator."""
    table = report.effect_table
    immediate = np.empty((report.T, report.d))
    delayed = np.empty((report.T, report.d))
    for t in range(1, report.T + 1):
        for j in range(report.d):
            immediate[t - 1, j], delayed[t - 1, j] = treatment_to_mediator_decomposition(table, t, j)
    return immediate, delayed


def trajectory_frame(report: MediationReport, spline_df: int) -> pd.DataFrame:
    """Long table of raw and spline-smoothed per-mediator trajectories.

    Smoothing is skipped (columns left empty) when T < spline_df.
    """
    immediate, delayed = treatment_series(report)
    series = {
        OutputFields.IIME: report.iime,
        OutputFields.DIME: report.dime,
        OutputFields.IMMEDIATE: immediate,
        OutputFields.DELAYED: delayed,
    }
    T, d = report.T, report.d
    columns = {
        OutputFields.STAGE: np.repeat(np.arange(1, T + 1), d),
        OutputFields.MEDIATOR: np.tile(np.arange(1, d + 1), T),
    }
    for name in TRAJECTORY_SERIES:
        raw = series[name]
        columns[name] = raw.reshape(-1)
        if T >= spline_df:
            smoothed = smooth_columns(raw, spline_df).reshape(-1)
        else:
            logger.warning("Skipping smoothing of %s: T=%d < spline_df=%d", name, T, spline_df)
            smoothed = np.full(T * d, np.nan)
        columns[name + OutputFields.SMOOTHED_SUFFIX] = smoothed
    return pd.DataFrame(columns)


def _summary(panel: Panel, report: MediationReport, cfg: AnalysisConfig) -> dict:
    summary = {
        "n": panel.n,
        "T": panel.T,
        "d": panel.d,
        "standardized": cfg.standardize,
        "bootstrap_reps": cfg.bootstrap_reps,
        "spline_df": cfg.spline_df,
        "seed": cfg.seed,
        "final_eta": report.final_eta.tolist(),
        "dag_edges": [[[int(i), int(j)] for i, j in zip(*np.nonzero(dag.adjacency))] for dag in report.dags],
    }
    if report.bootstrap_se is not None:
        summary["final_eta_se"] = report.bootstrap_se[OutputFields.ETA][-1].tolist()
    return summary


def analyze_real(panel: Panel, cfg: AnalysisConfig) -> AnalysisResult:
    """Estimate, optionally bootstrap, smooth and write the analysis outputs."""
    if cfg.standardize:
        panel = standardize_panel(panel)
    report = estimate_finite(panel, cfg.dag)
    if cfg.bootstrap_reps:
        estimator = functools.partial(estimate_finite, cfg=cfg.dag)
        report = report.with_bootstrap(bootstrap(panel, estimator, cfg.bootstrap_reps, cfg.seed).se)

    trajectories = trajectory_frame(report, cfg.spline_df)
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_report_csv(report, out / REPORT_FILE)]

    trajectory_path = out / TRAJECTORY_FILE
    trajectories.to_csv(trajectory_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    files.append(trajectory_path)

    summary_path = out / SUMMARY_FILE
    summary_path.write_text(json.dumps(_summary(panel, report, cfg), indent=2, sort_keys=True) + "\n")
    files.append(summary_path)
    logger.info("Analysis of n=%d T=%d d=%d written to %s", panel.n, panel.T, panel.d, out)
    return AnalysisResult(report, trajectories, tuple(files))
