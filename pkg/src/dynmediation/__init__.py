"""Public API for dynmediation."""
from __future__ import annotations

from dynmediation.baselines import (
    estimate_independent_mediators,
    estimate_independent_timepoints,
    estimate_with,
)
from dynmediation.config import (
    AnalysisConfig,
    AnalysisMode,
    BenchmarkGrid,
    DagLearnConfig,
    Horizon,
    Method,
    NoiseFamily,
    ProgressConfig,
    SimSettings,
    TransportMode,
    TreatmentKind,
)
from dynmediation.dag_learn import learn_dag, learn_stage_dag
from dynmediation.effects_finite import compute_finite_report, estimate_finite, report_from_params
from dynmediation.effects_infinite import estimate_infinite, report_from_stationary_params, stationary_quantities
from dynmediation.errors import MediationError, NumericalError, ValidationError
from dynmediation.model import (
    DagStructure,
    EffectTable,
    MediationReport,
    Panel,
    SemParams,
    StageEffects,
)
from dynmediation.oracle import mc_eta, path_total_effect, true_eta_finite, true_report, unroll
from dynmediation.regress import ols, within_stage_effects
from dynmediation.simulator import InterventionSpec, SimConfig, sample_params, simulate, simulate_intervened

__all__ = [
    "estimate_independent_mediators",
    "estimate_independent_timepoints",
    "estimate_with",
    "AnalysisConfig",
    "AnalysisMode",
    "BenchmarkGrid",
    "DagLearnConfig",
    "Horizon",
    "Method",
    "NoiseFamily",
    "ProgressConfig",
    "SimSettings",
    "TransportMode",
    "TreatmentKind",
    "learn_dag",
    "learn_stage_dag",
    "compute_finite_report",
    "estimate_finite",
    "report_from_params",
    "estimate_infinite",
    "report_from_stationary_params",
    "stationary_quantities",
    "MediationError",
    "NumericalError",
    "ValidationError",
    "DagStructure",
    "EffectTable",
    "MediationReport",
    "Panel",
    "SemParams",
    "StageEffects",
    "mc_eta",
    "path_total_effect",
    "true_eta_finite",
    "true_report",
    "unroll",
    "ols",
    "within_stage_effects",
    "InterventionSpec",
    "SimConfig",
    "sample_params",
    "simulate",
    "simulate_intervened",
]
