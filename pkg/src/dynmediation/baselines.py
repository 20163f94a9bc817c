"""Comparison estimators that each ignore one kind of dependence.

Both reuse the regression and recursion code of the proposed estimator with
a structure toggle, so differences come from the ignored structure alone.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg

from dynmediation.config import DagLearnConfig, Horizon, Method
from dynmediation.dag_learn import learn_stage_dag
from dynmediation.effects_finite import analytic_within_stage, estimate_finite
from dynmediation.effects_infinite import estimate_infinite, stationary_quantities
from dynmediation.model import MediationReport, Panel, SemParams, StageEffects, report_from_increments
from dynmediation.regress import within_stage_effects

logger = logging.getLogger(__name__)


def _stage_products(panel: Panel, cfg: DagLearnConfig) -> tuple[np.ndarray, list]:
    products = np.empty((panel.T, panel.d))
    dags = []
    for t in range(1, panel.T + 1):
        dag = learn_stage_dag(panel, t, cfg)
        effects = within_stage_effects(panel, dag, t, adjust_history=False)
        products[t - 1] = effects.a_to_m * effects.m_to_r
        dags.append(dag)
    logger.debug("Per-stage products for %d stages: %s", panel.T, products.mean(axis=0))
    return products, dags


def estimate_independent_timepoints(
    panel: Panel,
    cfg: DagLearnConfig | None = None,
    horizon: Horizon = Horizon.FINITE,
) -> MediationReport:
    """Treat every stage as a separate single-stage study.

    eta_j^(t) averages the stage-s products theta_{A_s -> M_sj} theta_{M_sj -> R_s}
    over s <= t; all carryover is zero, so IIME equals Delta. The infinite
    horizon averages stages 2..T into one row.
    """
    cfg = cfg or DagLearnConfig()
    products, dags = _stage_products(panel, cfg)
    if horizon is Horizon.INFINITE:
        limit = products[1:].mean(axis=0, keepdims=True) if panel.T > 1 else products
        return report_from_increments(Horizon.INFINITE, limit, limit, eta=limit, dags=tuple(dags))
    return report_from_increments(Horizon.FINITE, products, products, dags=tuple(dags))


def estimate_independent_mediators(
    panel: Panel,
    cfg: DagLearnConfig | None = None,
    horizon: Horizon = Horizon.FINITE,
    include_first_stage: bool = False,
) -> MediationReport:
    """Full pipeline with every mediator DAG forced empty."""
    if horizon is Horizon.INFINITE:
        return estimate_infinite(panel, cfg, include_first_stage, ignore_mediator_dependence=True)
    return estimate_finite(panel, cfg, ignore_mediator_dependence=True)


def estimate_with(
    method: Method,
    panel: Panel,
    horizon: Horizon,
    cfg: DagLearnConfig | None = None,
    include_first_stage: bool = False,
) -> MediationReport:
    """Run ``method`` on ``panel`` for the given horizon."""
    if method is Method.INDEPENDENT_TIMEPOINTS:
        return estimate_independent_timepoints(panel, cfg, horizon)
    if method is Method.INDEPENDENT_MEDIATORS:
        return estimate_independent_mediators(panel, cfg, horizon, include_first_stage)
    if horizon is Horizon.INFINITE:
        return estimate_infinite(panel, cfg, include_first_stage)
    return estimate_finite(panel, cfg)


def stationary_covariance(
    params: SemParams,
    treatment_var: float,
    noise_sd_mediator: float = 1.0,
    noise_sd_outcome: float = 1.0,
) -> np.ndarray:
    """Covariance of (M_t, R_t, A_t) under the stationary distribution of ``params``.

    (M_t, R_t) = (I - B6)^-1 (B7 (M_{t-1}, R_{t-1}) + g A_t + e_t), so the
    stationary covariance solves a discrete Lyapunov equation.
    """
    d = params.d
    lift = np.linalg.inv(np.eye(d + 1) - params.contemporaneous_block())
    transition = lift @ params.lagged_block()
    g = np.append(params.delta1, params.delta2)
    total = params.dag.total_effects()
    noise = np.zeros((d + 1, d + 1))
    noise[:d, :d] = noise_sd_mediator**2 * total.T @ total
    noise[d, d] = noise_sd_outcome**2
    innovation = lift @ (treatment_var * np.outer(g, g) + noise) @ lift.T
    state = scipy.linalg.solve_discrete_lyapunov(transition, innovation)

    cov = np.empty((d + 2, d + 2))
    cov[: d + 1, : d + 1] = state
    cov[: d + 1, d + 1] = cov[d + 1, : d + 1] = treatment_var * (lift @ g)
    cov[d + 1, d + 1] = treatment_var
    return cov


def independent_timepoints_limit(
    params: SemParams,
    treatment_var: float,
    noise_sd_mediator: float = 1.0,
    noise_sd_outcome: float = 1.0,
) -> np.ndarray:
    """Large-sample eta of the independent-timepoints estimator on a stationary panel.

    Each stage product uses theta_{M_j -> R} from R_t on (M_tj, Pa(M_tj), A_t)
    without the history, i.e. the population regression under the
    stationary covariance.
    """
    cov = stationary_covariance(params, treatment_var, noise_sd_mediator, noise_sd_outcome)
    d = params.d
    outcome, treatment = d, d + 1
    eta = np.empty(d)
    for j in range(d):
        z = [j, *params.dag.parents(j), treatment]
        beta = np.linalg.solve(cov[np.ix_(z, z)], cov[z, outcome])
        eta[j] = cov[j, treatment] / cov[treatment, treatment] * beta[0]
    return eta


def independent_mediators_limit(params: SemParams) -> np.ndarray:
    """Large-sample eta^(inf) of the empty-DAG estimator for stationary ``params``.

    With Pa(M_j) left out, theta_{M_j -> R} converges to
    (Sigma kappa)_j / Sigma_jj, Sigma the covariance of the mediator
    deviations, and theta_{M_j -> M} to e_j. The fitted transitions are
    unaffected by the DAG.
    """
    total = params.dag.total_effects()
    sigma = total.T @ total
    theta1 = analytic_within_stage(params)
    ignored = StageEffects(
        a_to_r=theta1.a_to_r,
        a_to_m=theta1.a_to_m,
        m_to_r=(sigma @ params.kappa) / np.diag(sigma),
        m_to_m=np.eye(params.d),
    )
    return stationary_quantities(params, ignored).eta()
