"""Infinite-horizon individual mediation effects under stationarity.

One SEM and one DAG are fitted on data pooled over stages; the long-run
effects then come from two linear systems built from the per-stage blocks
B6 (contemporaneous) and B7 (lagged) of the (M_t, R_t) process.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from dynmediation.config import DagLearnConfig, Horizon
from dynmediation.dag_learn import learn_stage_dag
from dynmediation.effects_finite import analytic_within_stage
from dynmediation.errors import DimensionMismatch, NonStationaryModel
from dynmediation.model import DagStructure, MediationReport, Panel, SemParams, StageEffects, report_from_increments
from dynmediation.regress import fit_sem_params, pooled_within_stage_effects

logger = logging.getLogger(__name__)

STATIONARITY_EPS = 1e-3
CONDITION_CAP = 1e10


@dataclass(frozen=True, eq=False)
class StationaryQuantities:
    """Long-run quantities per mediator j.

    B1: effect of treating every stage on M (stationary level).
    B2_j / B3_j: summed future effect of M_1j on later M_j copies / outcomes.
    B4 = B2 * B1 and B5 = B3 * B1 elementwise.
    """
    B1: np.ndarray
    B2: np.ndarray
    B3: np.ndarray
    B4: np.ndarray
    B5: np.ndarray
    B6: np.ndarray
    B7: np.ndarray
    theta_M_to_M1: np.ndarray
    theta_M_to_R1: np.ndarray
    spectral_radius: float
    condition_number: float

    @property
    def d(self) -> int:
        return self.B1.shape[0]

    def eta(self) -> np.ndarray:
        """eta_j^(inf) = rho_j B1_j + (B5_j - rho_j B4_j) / (1 + B2_j), rho_j = theta_{M_1j -> R_1}."""
        rho = self.theta_M_to_R1
        return rho * self.B1 + (self.B5 - rho * self.B4) / (1.0 + self.B2)


def _factored_solve(matrix: np.ndarray, rhs: np.ndarray, what: str, cond_cap: float) -> tuple[np.ndarray, float]:
    cond = float(np.linalg.cond(matrix))
    if not np.isfinite(cond) or cond > cond_cap:
        raise NonStationaryModel(f"{what} is ill-conditioned (condition number {cond:.3g} > {cond_cap:.3g})")
    return scipy.linalg.lu_solve(scipy.linalg.lu_factor(matrix), rhs), cond


def _stage_one_responses(theta1: StageEffects) -> np.ndarray:
    """Column j stacks (theta_{M_1j -> M_1}, theta_{M_1j -> R_1})."""
    return np.vstack([theta1.m_to_m.T, theta1.m_to_r[None, :]])


def stationary_quantities(
    params: SemParams,
    theta1: StageEffects,
    eps: float = STATIONARITY_EPS,
    cond_cap: float = CONDITION_CAP,
    per_mediator: bool = False,
) -> StationaryQuantities:
    """Solve the two long-run systems; raises NonStationaryModel near a unit root.

    ``per_mediator`` solves the future-effect system one column at a time.
    """
    d = params.d
    radius = params.spectral_radius()
    if radius >= 1.0 - eps:
        raise NonStationaryModel(f"transition spectral radius {radius:.6g} >= 1 - {eps:g}")

    B6, B7 = params.contemporaneous_block(), params.lagged_block()
    level_matrix = (1.0 - params.zeta2) * (np.eye(d) - params.Gamma1) - np.outer(params.zeta1, params.kappa + params.gamma2)
    level_rhs = (1.0 - params.zeta2) * params.delta1 + params.delta2 * params.zeta1
    B1, cond_level = _factored_solve(level_matrix, level_rhs, "stationary treatment system", cond_cap)

    future_matrix = np.eye(d + 1) - B6 - B7
    responses = _stage_one_responses(theta1)
    if per_mediator:
        columns = [
            _factored_solve(future_matrix, B7 @ responses[:, j], "future-effect system", cond_cap)[0]
            for j in range(d)
        ]
        future = np.column_stack(columns)
        cond_future = float(np.linalg.cond(future_matrix))
    else:
        future, cond_future = _factored_solve(future_matrix, B7 @ responses, "future-effect system", cond_cap)

    B2 = future[np.arange(d), np.arange(d)]
    B3 = future[d, :]
    if np.any(np.abs(1.0 + B2) < 1.0 / cond_cap):
        raise NonStationaryModel("1 + B2_j vanishes")
    return StationaryQuantities(
        B1=B1, B2=B2, B3=B3, B4=B2 * B1, B5=B3 * B1, B6=B6, B7=B7,
        theta_M_to_M1=theta1.m_to_m.copy(), theta_M_to_R1=theta1.m_to_r.copy(),
        spectral_radius=radius, condition_number=max(cond_level, cond_future),
    )


def infinite_report(q: StationaryQuantities, theta1: StageEffects, **extra) -> MediationReport:
    """Single-row report: Delta equals eta^(inf), IIME = theta_{A -> M_j} theta_{M_j -> R}."""
    eta = q.eta()[None, :]
    iime = (theta1.a_to_m * theta1.m_to_r)[None, :]
    return report_from_increments(Horizon.INFINITE, eta, iime, eta=eta, **extra)


def stationary_finite_eta(params: SemParams, theta1: StageEffects, T: int) -> tuple[np.ndarray, np.ndarray]:
    """eta_j^(t) and Delta_j^(t), t = 1..T, for constant parameters.

    Uses lag sequences of the companion matrix, so the cost is O(T^2 d)
    with O(T d) memory; agrees with the full finite recursion.
    """
    d = params.d
    P = params.transition_matrix()
    responses = _stage_one_responses(theta1)
    treatment = np.concatenate([theta1.a_to_m, [theta1.a_to_r]])

    lag_m = np.empty((T, d + 1, d))
    lag_a = np.empty((T, d + 1))
    lag_m[0], lag_a[0] = responses, treatment
    for k in range(1, T):
        lag_m[k] = P @ lag_m[k - 1]
        lag_a[k] = P @ lag_a[k - 1]

    delta = np.empty((T, d))
    for j in range(d):
        self_lag = lag_m[:, j, j]  # theta_{M_1j -> M_kj}
        rho = lag_m[:, d, j]  # theta_{M_1j -> R_k}
        carry = np.empty(T)
        carry[0] = rho[0]
        for k in range(1, T):
            carry[k] = rho[k] - self_lag[1 : k + 1] @ carry[k - 1 :: -1]
        reach = np.cumsum(lag_a[:, j])
        delta[:, j] = np.convolve(reach, carry)[:T]
    eta = np.cumsum(delta, axis=0) / np.arange(1, T + 1)[:, None]
    return eta, delta


def estimate_infinite(
    panel: Panel,
    cfg: DagLearnConfig | None = None,
    include_first_stage: bool = False,
    ignore_mediator_dependence: bool = False,
) -> MediationReport:
    """Pool stages, fit one SEM and one DAG, and evaluate eta_j^(inf)."""
    if panel.T < 2:
        raise DimensionMismatch("infinite-horizon estimation needs T >= 2")
    cfg = cfg or DagLearnConfig()
    if ignore_mediator_dependence:
        dag = DagStructure.empty(panel.d)
    else:
        dag = learn_stage_dag(panel, None, cfg, include_first_stage)
    params = fit_sem_params(panel, dag, None, include_first_stage)
    theta1 = pooled_within_stage_effects(panel, dag, include_first_stage)
    q = stationary_quantities(params, theta1)
    logger.info(
        "Estimated infinite-horizon effects: n=%d T=%d d=%d (spectral radius %.3f)",
        panel.n, panel.T, panel.d, q.spectral_radius,
    )
    return infinite_report(q, theta1, dags=(dag,))


def report_from_stationary_params(params: SemParams) -> MediationReport:
    """Exact eta^(inf) report for known stationary parameters."""
    theta1 = analytic_within_stage(params)
    return infinite_report(stationary_quantities(params, theta1), theta1, dags=(params.dag,))
