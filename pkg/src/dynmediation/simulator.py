"""Synthetic panels from the Markov mediation linear SEM.

Each stage draws, in this fixed order, the treatments, the mediator noise and
the outcome noise, so observational and interventional runs sharing a seed
use common random numbers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dynmediation.config import NoiseFamily, SimSettings, TreatmentKind
from dynmediation.errors import ConfigError, CyclicGraph, DimensionMismatch, NonStationaryModel, SingularStructure
from dynmediation.model import DagStructure, Panel, SemParams, topological_order, validate_panel

logger = logging.getLogger(__name__)

# Subjects per RNG stream; output does not depend on how blocks are scheduled.
SUBJECT_BLOCK = 4096

# 3-mediator benchmark DAG: M1 -> M2, M1 -> M3, M2 -> M3.
BENCHMARK_W = np.array([
    [0.0, -0.80, 0.61],
    [0.0, 0.0, -0.82],
    [0.0, 0.0, 0.0],
])

_MAX_PARAM_DRAWS = 10_000


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything needed to draw one panel.

    ``params`` holds one SemParams per simulated stage (burn-in included) or
    a single entry reused at every stage.
    """
    n: int
    T: int
    d: int
    params: tuple[SemParams, ...]
    treatment_prob: float = 0.5
    noise_sd_mediator: float = 1.0
    noise_sd_outcome: float = 1.0
    seed: int = 0
    initial_values: float = 0.0
    treatment_kind: TreatmentKind = TreatmentKind.BINARY
    noise_family: NoiseFamily = NoiseFamily.NORMAL
    burn_in: int = 0

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if self.n < 1 or self.T < 1 or self.d < 1:
            raise ConfigError(f"n, T and d must be positive, got n={self.n}, T={self.T}, d={self.d}")
        if not 0.0 <= self.treatment_prob <= 1.0:
            raise ConfigError(f"treatment_prob must lie in [0, 1], got {self.treatment_prob}")
        if self.noise_sd_mediator <= 0 or self.noise_sd_outcome <= 0:
            raise ConfigError("noise standard deviations must be > 0")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if len(self.params) not in (1, self.total_stages):
            raise ConfigError(
                f"expected 1 or {self.total_stages} parameter sets, got {len(self.params)}"
            )
        for p in self.params:
            if p.d != self.d:
                raise DimensionMismatch(f"parameter set has d={p.d}, config has d={self.d}")

    @classmethod
    def from_settings(cls, settings: SimSettings, params: Sequence[SemParams], seed: int) -> "SimConfig":
        return cls(
            n=settings.n,
            T=settings.T,
            d=settings.d,
            params=tuple(params),
            treatment_prob=settings.treatment_prob,
            noise_sd_mediator=settings.noise_sd_mediator,
            noise_sd_outcome=settings.noise_sd_outcome,
            seed=seed,
            treatment_kind=settings.treatment_kind,
            noise_family=settings.noise_family,
            burn_in=settings.burn_in_for(settings.horizon),
        )

    @property
    def total_stages(self) -> int:
        return self.T + self.burn_in

    def params_at(self, k: int) -> SemParams:
        """Parameters of simulated stage ``k`` (0-based, burn-in included)."""
        return self.params[0] if len(self.params) == 1 else self.params[k]


@dataclass(frozen=True)
class InterventionSpec:
    """do(A_s = treatment_value) and/or do(M_sj = mediator_value) for every s <= horizon."""
    treatment_value: float | None = None
    mediator_index: int | None = None
    mediator_value: float = 0.0

    @property
    def is_empty(self) -> bool:
        return self.treatment_value is None and self.mediator_index is None


def _signed_uniform(rng: np.random.Generator, size, low: float, high: float) -> np.ndarray:
    magnitude = rng.uniform(low, high, size=size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * magnitude


def sample_dag_weights(d: int, rng: np.random.Generator, edge_prob: float = 0.9) -> np.ndarray:
    """Upper-triangular W: Bernoulli(edge_prob) edges with weights in [-0.9,-0.5] U [0.5,0.9]."""
    W = np.zeros((d, d))
    rows, cols = np.triu_indices(d, k=1)
    present = rng.random(len(rows)) < edge_prob
    weights = _signed_uniform(rng, len(rows), 0.5, 0.9)
    W[rows, cols] = np.where(present, weights, 0.0)
    return W


def _sample_theta(d: int, dag: DagStructure, rng: np.random.Generator) -> SemParams:
    u = lambda *shape: rng.uniform(-0.5, 0.5, size=shape)  # noqa: E731
    return SemParams(
        dag=dag,
        alpha1=u(d),
        delta1=u(d),
        Gamma1=u(d, d),
        zeta1=u(d),
        alpha2=float(u()),
        delta2=float(u()),
        gamma2=u(d),
        zeta2=float(u()),
        kappa=u(d),
    )


def sample_params(
    d: int,
    T: int,
    time_varying: bool,
    seed: int,
    edge_prob: float = 0.9,
    weights: np.ndarray | None = None,
    max_spectral_radius: float | None = None,
) -> list[SemParams]:
    """Draw benchmark parameters: Theta entries from U(-0.5, 0.5) and one shared W.

    ``time_varying`` draws a fresh Theta per stage (T entries); otherwise a
    single SemParams is returned for reuse at every stage. ``weights`` fixes
    W instead of sampling it. ``max_spectral_radius`` redraws each Theta
    until its transition matrix is that stable.
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    W = sample_dag_weights(d, rng, edge_prob) if weights is None else np.asarray(weights, dtype=float)
    if W.shape != (d, d):
        raise DimensionMismatch(f"weights must be {d}x{d}, got {W.shape}")
    dag = DagStructure.from_weights(W)
    topological_order(dag)

    count = T if time_varying else 1
    params = []
    for _ in range(count):
        for _attempt in range(_MAX_PARAM_DRAWS):
            candidate = _sample_theta(d, dag, rng)
            if max_spectral_radius is None or candidate.spectral_radius() <= max_spectral_radius:
                params.append(candidate)
                break
        else:
            raise NonStationaryModel(
                f"no parameter draw with spectral radius <= {max_spectral_radius} in {_MAX_PARAM_DRAWS} tries"
            )
    logger.debug("Sampled %d parameter set(s) with %d DAG edges (seed=%d)", count, dag.n_edges, seed)
    return params


def benchmark_params(
    horizon_infinite: bool,
    seed: int,
    T: int,
    burn_in: int = 0,
    max_spectral_radius: float = 0.95,
) -> list[SemParams]:
    """Parameters of the 3-mediator benchmark with its fixed W."""
    if horizon_infinite:
        return sample_params(
            3, 1, time_varying=False, seed=seed, weights=BENCHMARK_W, max_spectral_radius=max_spectral_radius,
        )
    return sample_params(3, T + burn_in, time_varying=True, seed=seed, weights=BENCHMARK_W)


def _draw_noise(rng: np.random.Generator, family: NoiseFamily, sd: float, size) -> np.ndarray:
    if family is NoiseFamily.UNIFORM:
        half_width = np.sqrt(3.0) * sd
        return rng.uniform(-half_width, half_width, size=size)
    return sd * rng.standard_normal(size)


def _draw_treatment(rng: np.random.Generator, cfg: SimConfig, size: int) -> np.ndarray:
    if cfg.treatment_kind is TreatmentKind.CONTINUOUS:
        return rng.standard_normal(size)
    return (rng.random(size) < cfg.treatment_prob).astype(float)


def _stage_orders(cfg: SimConfig) -> list[tuple[int, ...]]:
    orders = {}
    result = []
    for k in range(cfg.total_stages):
        p = cfg.params_at(k)
        if id(p) not in orders:
            try:
                orders[id(p)] = topological_order(p.dag)
            except CyclicGraph as e:
                raise SingularStructure(f"(I - W^T) is not invertible at stage {k + 1}: {e}") from e
        result.append(orders[id(p)])
    return result


def _simulate_block(
    cfg: SimConfig,
    spec: InterventionSpec,
    horizon: int,
    orders: list[tuple[int, ...]],
    block: int,
    size: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(block,)))
    stages, d = cfg.total_stages, cfg.d
    A = np.empty((size, stages))
    M = np.empty((size, stages, d))
    R = np.empty((size, stages))
    m_prev = np.full((size, d), cfg.initial_values, dtype=float)
    r_prev = np.full(size, cfg.initial_values, dtype=float)

    for k in range(stages):
        p = cfg.params_at(k)
        a = _draw_treatment(rng, cfg, size)
        eps_w = _draw_noise(rng, cfg.noise_family, cfg.noise_sd_mediator, (size, d))
        eps_r = _draw_noise(rng, cfg.noise_family, cfg.noise_sd_outcome, size)

        intervened = cfg.burn_in <= k < cfg.burn_in + horizon
        if intervened and spec.treatment_value is not None:
            a = np.full(size, float(spec.treatment_value))

        mu = p.alpha1 + np.outer(a, p.delta1) + m_prev @ p.Gamma1.T + np.outer(r_prev, p.zeta1)
        deviation = np.zeros((size, d))
        for j in orders[k]:
            if intervened and spec.mediator_index == j:
                deviation[:, j] = spec.mediator_value - mu[:, j]
            else:
                deviation[:, j] = deviation @ p.dag.weights[:, j] + eps_w[:, j]
        m = mu + deviation
        r = p.alpha2 + p.delta2 * a + m_prev @ p.gamma2 + p.zeta2 * r_prev + m @ p.kappa + eps_r

        A[:, k], M[:, k, :], R[:, k] = a, m, r
        m_prev, r_prev = m, r
    return A, M, R


def simulate_intervened(cfg: SimConfig, spec: InterventionSpec, horizon: int) -> Panel:
    """Draw from the mutilated SEM where the interventions hold for stages 1..horizon.

    Stages count after burn-in. Downstream variables keep their structural
    equations with the intervened values substituted.
    """
    if spec.mediator_index is not None and not 0 <= spec.mediator_index < cfg.d:
        raise DimensionMismatch(f"mediator_index {spec.mediator_index} outside 0..{cfg.d - 1}")
    orders = _stage_orders(cfg)
    n_blocks = -(-cfg.n // SUBJECT_BLOCK)
    parts = [
        _simulate_block(cfg, spec, horizon, orders, b, min(SUBJECT_BLOCK, cfg.n - b * SUBJECT_BLOCK))
        for b in range(n_blocks)
    ]
    A = np.concatenate([p[0] for p in parts])
    M = np.concatenate([p[1] for p in parts])
    R = np.concatenate([p[2] for p in parts])
    if not (np.isfinite(M).all() and np.isfinite(R).all()):
        raise SingularStructure("simulation produced non-finite values (explosive parameters?)")

    b = cfg.burn_in
    panel = Panel(cfg.n, cfg.T, cfg.d, A[:, b:], M[:, b:, :], R[:, b:])
    logger.debug(
        "Simulated panel n=%d T=%d d=%d (burn_in=%d, interventions=%s)",
        cfg.n, cfg.T, cfg.d, b, "none" if spec.is_empty else spec,
    )
    return validate_panel(panel)


def simulate(cfg: SimConfig) -> Panel:
    return simulate_intervened(cfg, InterventionSpec(), horizon=0)
