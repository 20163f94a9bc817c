"""Finite-horizon individual mediation effects.

Within-stage effects are carried across stages by the transition recursion,
the intervened carryover effects are filled backwards in the source stage,
and eta_j^(t) follows the running-mean recursion
t * eta^(t) = (t - 1) * eta^(t-1) + Delta^(t).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dynmediation.config import DagLearnConfig, Horizon
from dynmediation.dag_learn import learn_stage_dag
from dynmediation.errors import MissingQuantity, RankDeficient
from dynmediation.model import (
    DagStructure,
    EffectTable,
    MediationReport,
    Panel,
    SemParams,
    StageEffects,
    report_from_increments,
)
from dynmediation.regress import fit_sem_params, within_stage_effects

logger = logging.getLogger(__name__)


def analytic_within_stage(params: SemParams) -> StageEffects:
    """Exact within-stage effects implied by one stage's parameters."""
    total = params.dag.total_effects()
    return StageEffects(
        a_to_r=float(params.delta2 + params.kappa @ params.delta1),
        a_to_m=params.delta1.copy(),
        m_to_r=total @ params.kappa,
        m_to_m=total,
    )


def _require(values: np.ndarray, what: str, t: int) -> None:
    if not np.isfinite(values).all():
        raise MissingQuantity(f"{what} not available when processing stage {t}")


def propagate_cross_stage(table: EffectTable, params_t: SemParams, t: int, in_place: bool = False) -> EffectTable:
    """Extend ``table`` with the effects of every earlier stage s < t on stage t.

    Mediator targets are updated before outcome targets because the outcome
    update consumes theta_{. -> M_t}.
    """
    if t < 2:
        return table if in_place else table.copy()
    out = table if in_place else table.copy()
    i = t - 1
    a_prev, ar_prev = out.a_to_m[:i, i - 1], out.a_to_r[:i, i - 1]
    mm_prev, mr_prev = out.m_to_m[:i, i - 1], out.m_to_r[:i, i - 1]
    _require(a_prev, "theta_{A_s -> M_(t-1)}", t)
    _require(ar_prev, "theta_{A_s -> R_(t-1)}", t)
    _require(mm_prev, "theta_{M_s -> M_(t-1)}", t)
    _require(mr_prev, "theta_{M_s -> R_(t-1)}", t)

    p = params_t
    a_to_m = a_prev @ p.Gamma1.T + np.outer(ar_prev, p.zeta1)
    out.a_to_m[:i, i] = a_to_m
    out.a_to_r[:i, i] = p.zeta2 * ar_prev + a_to_m @ p.kappa + a_prev @ p.gamma2

    m_to_m = mm_prev @ p.Gamma1.T + mr_prev[..., None] * p.zeta1
    out.m_to_m[:i, i] = m_to_m
    out.m_to_r[:i, i] = p.zeta2 * mr_prev + m_to_m @ p.kappa + mm_prev @ p.gamma2
    return out


@dataclass
class FiniteEstimatorState:
    """Single-writer accumulator of the stage loop.

    ``intervened_m_to_r[s, t, j]`` is the effect of M_sj on R_t with
    M_(s+1)j .. M_tj held fixed.
    """
    effect_table: EffectTable
    intervened_m_to_r: np.ndarray
    eta: np.ndarray
    delta: np.ndarray
    iime: np.ndarray

    @classmethod
    def start(cls, T: int, d: int) -> "FiniteEstimatorState":
        return cls(
            effect_table=EffectTable.allocate(T, d),
            intervened_m_to_r=np.full((T, T, d), np.nan),
            eta=np.full((T, d), np.nan),
            delta=np.full((T, d), np.nan),
            iime=np.full((T, d), np.nan),
        )


def intervened_carryover(state: FiniteEstimatorState, j: int, t: int) -> FiniteEstimatorState:
    """Fill intervened_m_to_r[s, t, j] for s = t down to 1."""
    table = state.effect_table
    i = t - 1
    _require(table.m_to_r[: i + 1, i, j], f"theta_{{M_s{j} -> R_t}}", t)
    carry = state.intervened_m_to_r
    carry[i, i, j] = table.m_to_r[i, i, j]
    for s in range(i - 1, -1, -1):
        later = np.arange(s + 1, i + 1)
        through = table.m_to_m[s, later, j, j]
        _require(through, f"theta_{{M_s{j} -> M_i{j}}}", t)
        carry[s, i, j] = table.m_to_r[s, i, j] - through @ carry[later, i, j]
    return state


def _incremental_effect(state: FiniteEstimatorState, j: int, t: int) -> float:
    """Delta_j^(t) = sum_i theta^{intervened}_{M_ij -> R_t} * sum_{s<=i} theta_{A_s -> M_ij}."""
    i = t - 1
    a_to_m = state.effect_table.a_to_m
    reach = np.array([a_to_m[: u + 1, u, j].sum() for u in range(i + 1)])
    return float(reach @ state.intervened_m_to_r[: i + 1, i, j])


def advance_stage(
    state: FiniteEstimatorState,
    t: int,
    within: StageEffects,
    params_t: SemParams | None,
) -> FiniteEstimatorState:
    """Process stage ``t``: within-stage slice, propagation, carryover, eta update."""
    table = state.effect_table
    table.with_within_stage(t, within, in_place=True)
    if t > 1:
        if params_t is None:
            raise MissingQuantity(f"stage {t} needs its SEM parameters for propagation")
        propagate_cross_stage(table, params_t, t, in_place=True)

    i = t - 1
    previous = state.eta[i - 1] if t > 1 else np.zeros(table.d)
    for j in range(table.d):
        intervened_carryover(state, j, t)
        state.delta[i, j] = _incremental_effect(state, j, t)
    state.iime[i] = table.a_to_m[i, i] * table.m_to_r[i, i]
    state.eta[i] = ((t - 1) * previous + state.delta[i]) / t
    return state


def compute_finite_report(
    params_by_stage: Sequence[SemParams | None],
    within_by_stage: Sequence[StageEffects],
    dags: Sequence[DagStructure] = (),
) -> MediationReport:
    """Run the full recursion from given per-stage parameters and within-stage effects.

    ``params_by_stage[0]`` is not used: stage 1 has no incoming transition.
    """
    T = len(within_by_stage)
    if T < 1:
        raise MissingQuantity("at least one stage is required")
    if len(params_by_stage) != T:
        raise MissingQuantity(f"{len(params_by_stage)} parameter sets for {T} stages")
    state = FiniteEstimatorState.start(T, within_by_stage[0].d)
    for t in range(1, T + 1):
        advance_stage(state, t, within_by_stage[t - 1], params_by_stage[t - 1])

    report = report_from_increments(
        Horizon.FINITE,
        state.delta,
        state.iime,
        eta=state.eta,
        effect_table=state.effect_table.freeze(),
        dags=tuple(dags),
    )
    return report


def report_from_params(params_by_stage: Sequence[SemParams]) -> MediationReport:
    """Exact finite-horizon report when the per-stage parameters are known."""
    within = [analytic_within_stage(p) for p in params_by_stage]
    return compute_finite_report(list(params_by_stage), within, [p.dag for p in params_by_stage])


def fit_stage(
    panel: Panel,
    t: int,
    cfg: DagLearnConfig,
    ignore_mediator_dependence: bool = False,
) -> tuple[DagStructure, SemParams | None, StageEffects]:
    """Learn the DAG, fit the SEM (t >= 2) and the within-stage effects of one stage."""
    if ignore_mediator_dependence:
        dag = DagStructure.empty(panel.d)
    else:
        try:
            dag = learn_stage_dag(panel, t, cfg)
        except RankDeficient as e:
            raise e.with_context(stage=t) from e
    params = fit_sem_params(panel, dag, t) if t > 1 else None
    within = within_stage_effects(panel, dag, t)
    return dag, params, within


def estimate_finite(
    panel: Panel,
    cfg: DagLearnConfig | None = None,
    ignore_mediator_dependence: bool = False,
) -> MediationReport:
    """Estimate eta_j^(t), Delta, IIME and DIME for t = 1..T from a panel.

    Each stage gets its own DAG and SEM fit; ``ignore_mediator_dependence``
    forces every DAG empty.
    """
    cfg = cfg or DagLearnConfig()
    fitted = [fit_stage(panel, t, cfg, ignore_mediator_dependence) for t in range(1, panel.T + 1)]
    dags, params, within = zip(*fitted)
    report = compute_finite_report(list(params), list(within), dags)
    logger.info("Estimated finite-horizon effects: n=%d T=%d d=%d", panel.n, panel.T, panel.d)
    return report


def treatment_to_mediator_decomposition(table: EffectTable, t: int, j: int) -> tuple[float, float]:
    """(immediate, delayed) effect of the treatments on M_tj."""
    i = t - 1
    immediate = float(table.a_to_m[i, i, j])
    delayed = float(table.a_to_m[:i, i, j].sum())
    return immediate, delayed
