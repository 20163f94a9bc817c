"""Configuration types for estimation, simulation and the harness."""
from __future__ import annotations

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping

from dynmediation.errors import ConfigError

logger = logging.getLogger(__name__)

# Warm-up stages dropped from stationary simulations unless burn_in is set.
INFINITE_BURN_IN = 5


class TransportMode(Enum):
    """Transport mode for the progress stream."""
    TCP = "tcp"
    IPC = "ipc"


class Horizon(Enum):
    FINITE = "finite"
    INFINITE = "infinite"


class TreatmentKind(Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


class NoiseFamily(Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"


class Method(Enum):
    PROPOSED = "proposed"
    INDEPENDENT_TIMEPOINTS = "independent-timepoints"
    INDEPENDENT_MEDIATORS = "independent-mediators"


class AnalysisMode(Enum):
    SIMULATE = "simulate"
    ESTIMATE_FINITE = "estimate-finite"
    ESTIMATE_INFINITE = "estimate-infinite"
    BENCHMARK = "benchmark"
    ORACLE = "oracle"
    ANALYZE = "analyze"

    def get_handler_name(self) -> str:
        return "run_" + self.value.replace("-", "_")

    def dispatch(self, handlers, cfg):
        return getattr(handlers, self.get_handler_name())(cfg)


@dataclass(frozen=True)
class DagLearnConfig:
    """Knobs of the within-stage mediator DAG learner."""
    l1_penalty: float = 0.02
    weight_threshold: float = 0.3
    max_iterations: int = 500
    convergence_tol: float = 1e-8
    known_order: tuple[int, ...] | None = None
    mu_schedule: tuple[float, ...] = (1.0, 0.1, 0.01, 0.001)
    barrier_s: float = 1.0
    acyclicity_tol: float = 1e-2

    def __post_init__(self):
        if self.l1_penalty < 0:
            raise ConfigError("l1_penalty must be >= 0")
        if self.weight_threshold <= 0:
            raise ConfigError("weight_threshold must be > 0")
        if self.convergence_tol <= 0:
            raise ConfigError("convergence_tol must be > 0")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.mu_schedule or any(mu <= 0 for mu in self.mu_schedule):
            raise ConfigError("mu_schedule must be a non-empty sequence of positive values")


@dataclass(frozen=True)
class ProgressConfig:
    """Where benchmark progress is published (port None disables streaming)."""
    port: int | None = None
    host: str = "*"
    transport_mode: TransportMode = TransportMode.TCP
    ipc_socket_dir: str = "ipc"
    ipc_socket_prefix: str = "progress"
    ipc_socket_extension: str = ".sock"
    app_name: str = "dynmediation"


@dataclass(frozen=True)
class SimSettings:
    """Scalar simulation settings; parameters are sampled from ``seed``."""
    n: int = 500
    T: int = 10
    d: int = 3
    horizon: Horizon = Horizon.FINITE
    treatment_prob: float = 0.5
    treatment_kind: TreatmentKind = TreatmentKind.BINARY
    noise_sd_mediator: float = 1.0
    noise_sd_outcome: float = 1.0
    noise_family: NoiseFamily = NoiseFamily.NORMAL
    burn_in: int | None = None
    edge_prob: float = 0.9
    param_seed: int = 2023

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError(f"burn_in must be >= 0, got {self.burn_in}")

    def burn_in_for(self, horizon: Horizon) -> int:
        """The explicit burn_in, else INFINITE_BURN_IN stages for stationary runs and 0 otherwise."""
        if self.burn_in is not None:
            return self.burn_in
        return INFINITE_BURN_IN if horizon is Horizon.INFINITE else 0

    def for_horizon(self, horizon: Horizon) -> "SimSettings":
        return replace(self, burn_in=self.burn_in_for(horizon))


@dataclass(frozen=True)
class BenchmarkGrid:
    horizon: Horizon = Horizon.FINITE
    n_values: tuple[int, ...] = (100, 500)
    T_values: tuple[int, ...] = (10,)
    methods: tuple[Method, ...] = tuple(Method)
    reps: int = 100

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError(f"benchmark needs reps >= 1, got {self.reps}")
        for name in ("n_values", "T_values", "methods"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if min(self.n_values) < 1 or min(self.T_values) < 1:
            raise ConfigError("n_values and T_values must be positive")


@dataclass(frozen=True)
class AnalysisConfig:
    mode: AnalysisMode = AnalysisMode.ESTIMATE_FINITE
    input_path: Path | None = None
    output_path: Path = Path("out")
    seed: int = 0
    threads: int = 1
    sim: SimSettings = field(default_factory=SimSettings)
    dag: DagLearnConfig = field(default_factory=DagLearnConfig)
    grid: BenchmarkGrid = field(default_factory=BenchmarkGrid)
    progress: ProgressConfig = field(default_factory=ProgressConfig)
    bootstrap_reps: int = 0
    spline_df: int = 6
    standardize: bool = False
    include_first_stage: bool = False

    def __post_init__(self):
        if self.bootstrap_reps < 0:
            raise ConfigError("bootstrap_reps must be >= 0")
        if self.spline_df < 2:
            raise ConfigError("spline_df must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        needs_input = (AnalysisMode.ESTIMATE_FINITE, AnalysisMode.ESTIMATE_INFINITE)
        if self.mode in needs_input and self.input_path is None:
            raise ConfigError(f"mode {self.mode.value} requires an input panel")


def _as_tuple(kind: Callable[[Any], Any]) -> Callable[[Any], tuple]:
    def convert(value):
        if isinstance(value, (list, tuple)):
            return tuple(kind(v) for v in value)
        return (kind(value),)
    return convert


# flat key -> (section, field, converter); section None means AnalysisConfig itself
_CONFIG_KEYS: dict[str, tuple[str | None, str, Callable[[Any], Any]]] = {
    "mode": (None, "mode", AnalysisMode),
    "input": (None, "input_path", Path),
    "out": (None, "output_path", Path),
    "seed": (None, "seed", int),
    "threads": (None, "threads", int),
    "bootstrap": (None, "bootstrap_reps", int),
    "standardize": (None, "standardize", bool),
    "spline_df": (None, "spline_df", int),
    "include_first_stage": (None, "include_first_stage", bool),
    "n": ("sim", "n", int),
    "T": ("sim", "T", int),
    "d": ("sim", "d", int),
    "horizon": ("sim", "horizon", Horizon),
    "treatment_prob": ("sim", "treatment_prob", float),
    "treatment_kind": ("sim", "treatment_kind", TreatmentKind),
    "noise_sd_mediator": ("sim", "noise_sd_mediator", float),
    "noise_sd_outcome": ("sim", "noise_sd_outcome", float),
    "noise_family": ("sim", "noise_family", NoiseFamily),
    "burn_in": ("sim", "burn_in", int),
    "edge_prob": ("sim", "edge_prob", float),
    "param_seed": ("sim", "param_seed", int),
    "reps": ("grid", "reps", int),
    "n_values": ("grid", "n_values", _as_tuple(int)),
    "T_values": ("grid", "T_values", _as_tuple(int)),
    "methods": ("grid", "methods", _as_tuple(Method)),
    "l1_penalty": ("dag", "l1_penalty", float),
    "weight_threshold": ("dag", "weight_threshold", float),
    "max_iterations": ("dag", "max_iterations", int),
    "convergence_tol": ("dag", "convergence_tol", float),
    "known_order": ("dag", "known_order", _as_tuple(int)),
    "progress_port": ("progress", "port", int),
    "progress_transport": ("progress", "transport_mode", TransportMode),
}

CONFIG_KEYS = tuple(_CONFIG_KEYS)


def build_analysis_config(values: Mapping[str, Any], base: AnalysisConfig | None = None) -> AnalysisConfig:
    """Apply flat key/value settings on top of ``base`` (defaults if None)."""
    base = base or AnalysisConfig(mode=AnalysisMode.SIMULATE)
    top: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {"sim": {}, "dag": {}, "grid": {}, "progress": {}}
    for key, raw in values.items():
        if raw is None:
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"Unknown config key: {key!r}")
        section, name, convert = _CONFIG_KEYS[key]
        try:
            value = convert(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid value for {key!r}: {raw!r} ({e})") from e
        if section is None:
            top[name] = value
        else:
            sections[section][name] = value

    # horizon is shared by the simulation settings and the benchmark grid
    if "horizon" in sections["sim"]:
        sections["grid"]["horizon"] = sections["sim"]["horizon"]
    for section, updates in sections.items():
        if updates:
            top[section] = replace(getattr(base, section), **updates)
    return replace(base, **top)


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a flat TOML config file into a key/value mapping."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Cannot parse config file {path}: {e}") from e
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"Config file must be flat, found tables: {nested}")
    logger.debug("Loaded %d config keys from %s", len(data), path)
    return data
