"""Command-line entry point: ``dynmediation <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import functools
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from dynmediation.config import (
    AnalysisConfig,
    AnalysisMode,
    Horizon,
    build_analysis_config,
    load_config_file,
)
from dynmediation.effects_finite import estimate_finite
from dynmediation.effects_infinite import estimate_infinite, report_from_stationary_params
from dynmediation.errors import MediationError, NumericalError
from dynmediation.harness.analysis import analyze_real, ihs_like_config
from dynmediation.harness.benchmark import cell_params, run_benchmark
from dynmediation.harness.bootstrap import bootstrap
from dynmediation.harness.io import read_panel_csv, standardize_panel, write_benchmark_csv, write_panel_csv, write_report_csv
from dynmediation.model import MediationReport, Panel
from dynmediation.oracle import true_report
from dynmediation.simulator import SimConfig, simulate
from dynmediation.streaming.publisher import ProgressPublisher

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

PANEL_FILE = "panel.csv"
TRUTH_FILE = "truth.csv"
REPORT_FILE = "report.csv"
BENCHMARK_FILE = "benchmark.csv"
ORACLE_FILE = "oracle.csv"


def configure_logging(level: str = "INFO", log_file: str | None = None):
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=getattr(logging, level.upper()), format=LOG_FORMAT, handlers=handlers, force=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat TOML file of config keys")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--reps", type=int, help="benchmark replications per cell")
    common.add_argument("--threads", type=int, help="worker processes")
    common.add_argument("--bootstrap", type=int, help="bootstrap replicates (0 disables)")
    common.add_argument("--standardize", action="store_true", default=None, help="z-score mediators and outcome")
    common.add_argument("--spline-df", type=int, help="spline degrees of freedom")
    common.add_argument("--input", type=Path, help="panel CSV (id,t,A,M1..Md,R)")
    common.add_argument("--n", type=int, help="subjects to simulate")
    common.add_argument("--T", type=int, help="stages to simulate")
    common.add_argument("--d", type=int, help="mediators to simulate")
    common.add_argument("--horizon", choices=[h.value for h in Horizon])
    common.add_argument("--progress-port", type=int, help="publish benchmark progress on this port")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--log-file")

    parser = argparse.ArgumentParser(prog="dynmediation", description="Dynamic multi-mediator mediation analysis")
    subparsers = parser.add_subparsers(dest="mode", required=True)
    for mode in AnalysisMode:
        subparsers.add_parser(mode.value, parents=[common])
    return parser


# CLI flag -> config key
_FLAG_KEYS = {
    "seed": "seed",
    "out": "out",
    "reps": "reps",
    "threads": "threads",
    "bootstrap": "bootstrap",
    "standardize": "standardize",
    "spline_df": "spline_df",
    "input": "input",
    "n": "n",
    "T": "T",
    "d": "d",
    "horizon": "horizon",
    "progress_port": "progress_port",
}


def config_from_args(args: argparse.Namespace) -> AnalysisConfig:
    """Config file keys first, then every flag that was given."""
    values = load_config_file(args.config) if args.config else {}
    values.pop("mode", None)
    values.update({key: getattr(args, flag) for flag, key in _FLAG_KEYS.items() if getattr(args, flag) is not None})
    values["mode"] = args.mode
    return build_analysis_config(values)


def _prepare(panel: Panel, cfg: AnalysisConfig) -> Panel:
    return standardize_panel(panel) if cfg.standardize else panel


def _with_bootstrap(report: MediationReport, panel: Panel, estimator, cfg: AnalysisConfig) -> MediationReport:
    if not cfg.bootstrap_reps:
        return report
    return report.with_bootstrap(bootstrap(panel, estimator, cfg.bootstrap_reps, cfg.seed).se)


def _truth(cfg: AnalysisConfig) -> MediationReport:
    params = cell_params(cfg.sim, cfg.sim.horizon, cfg.sim.T)
    if cfg.sim.horizon is Horizon.INFINITE:
        return report_from_stationary_params(params[0])
    return true_report(params if len(params) == 1 else params[cfg.sim.burn_in_for(cfg.sim.horizon):], cfg.sim.T)


class CliHandlers:
    """One handler per AnalysisMode, looked up by AnalysisMode.dispatch."""

    @staticmethod
    def run_simulate(cfg: AnalysisConfig):
        params = cell_params(cfg.sim, cfg.sim.horizon, cfg.sim.T)
        panel = simulate(SimConfig.from_settings(cfg.sim, params, cfg.seed))
        write_panel_csv(panel, cfg.output_path / PANEL_FILE)
        write_report_csv(_truth(cfg), cfg.output_path / TRUTH_FILE)

    @staticmethod
    def run_estimate_finite(cfg: AnalysisConfig):
        panel = _prepare(read_panel_csv(cfg.input_path), cfg)
        report = estimate_finite(panel, cfg.dag)
        estimator = functools.partial(estimate_finite, cfg=cfg.dag)
        write_report_csv(_with_bootstrap(report, panel, estimator, cfg), cfg.output_path / REPORT_FILE)

    @staticmethod
    def run_estimate_infinite(cfg: AnalysisConfig):
        panel = _prepare(read_panel_csv(cfg.input_path), cfg)
        estimator = functools.partial(estimate_infinite, cfg=cfg.dag, include_first_stage=cfg.include_first_stage)
        report = estimator(panel)
        write_report_csv(_with_bootstrap(report, panel, estimator, cfg), cfg.output_path / REPORT_FILE)

    @staticmethod
    def run_benchmark(cfg: AnalysisConfig):
        with ProgressPublisher(cfg.progress) as publisher:
            result = run_benchmark(cfg, publisher)
        write_benchmark_csv(result.rows, cfg.output_path / BENCHMARK_FILE)
        for cell, failed in sorted(result.failures.items()):
            logger.warning("Cell %s: %d failed replications", cell, failed)

    @staticmethod
    def run_oracle(cfg: AnalysisConfig):
        write_report_csv(_truth(cfg), cfg.output_path / ORACLE_FILE)

    @staticmethod
    def run_analyze(cfg: AnalysisConfig):
        if cfg.input_path is not None:
            panel = read_panel_csv(cfg.input_path)
        else:
            logger.info("No input panel given; analysing a synthetic cohort-shaped panel")
            panel = simulate(ihs_like_config(cfg.seed))
        analyze_real(panel, cfg)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    try:
        cfg = config_from_args(args)
        logger.info("Running %s (seed=%d, out=%s)", cfg.mode.value, cfg.seed, cfg.output_path)
        cfg.mode.dispatch(CliHandlers, cfg)
    except MediationError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except np.linalg.LinAlgError as e:
        logger.error("LinAlgError: %s", e)
        return NumericalError.exit_code
    return 0
