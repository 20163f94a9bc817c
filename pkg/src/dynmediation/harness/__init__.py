"""Data ingestion, benchmarking, bootstrap, smoothing and the CLI."""
from __future__ import annotations

from dynmediation.harness.analysis import AnalysisResult, analyze_real, ihs_like_config
from dynmediation.harness.benchmark import BenchmarkResult, run_benchmark
from dynmediation.harness.bootstrap import BootstrapResult, bootstrap, bootstrap_se
from dynmediation.harness.io import (
    read_panel_csv,
    standardize_panel,
    write_benchmark_csv,
    write_panel_csv,
    write_report_csv,
)
from dynmediation.harness.spline import natural_spline_basis, smooth_trajectory

__all__ = [
    "AnalysisResult",
    "analyze_real",
    "ihs_like_config",
    "BenchmarkResult",
    "run_benchmark",
    "BootstrapResult",
    "bootstrap",
    "bootstrap_se",
    "read_panel_csv",
    "standardize_panel",
    "write_benchmark_csv",
    "write_panel_csv",
    "write_report_csv",
    "natural_spline_basis",
    "smooth_trajectory",
]
