"""Least squares via pivoted QR, within-stage effect regressions and SEM fits."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from dynmediation.errors import RankDeficient
from dynmediation.model import DagStructure, Panel, SemParams, StageData, StageEffects

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Coefficients are ordered as the design: intercept first when present."""
    coefficients: np.ndarray
    residual_variance: float
    design_rank: int
    n_used: int
    residuals: np.ndarray


def ols(y, X, intercept: bool = True) -> OlsFit:
    """Minimise ||y - [1, X] beta||^2 through a column-pivoted QR.

    Raises RankDeficient, listing the dependent design columns, instead of
    falling back to a pseudo-inverse.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = y.shape[0]
    design = np.column_stack([np.ones(n), X]) if intercept else X
    p = design.shape[1]
    if n <= p:
        raise RankDeficient(range(p), detail=f"{n} observations for {p} coefficients")

    Q, R, pivots = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if p else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < p:
        raise RankDeficient(sorted(int(c) for c in pivots[rank:]))

    coefficients = np.empty(p)
    coefficients[pivots] = scipy.linalg.solve_triangular(R, Q.T @ y)
    residuals = y - design @ coefficients
    return OlsFit(
        coefficients=coefficients,
        residual_variance=float(residuals @ residuals / (n - p)),
        design_rank=rank,
        n_used=n,
        residuals=residuals,
    )


def _history_block(data: StageData, adjust_history: bool) -> np.ndarray:
    return data.history() if adjust_history else np.empty((data.n, 0))


def within_stage_effects(
    panel: Panel,
    dag_t: DagStructure,
    t: int,
    adjust_history: bool = True,
    adjust_treatment: bool = True,
) -> StageEffects:
    """Within-stage total effects at stage ``t`` by backdoor-adjusted regressions.

    theta_{M_tj -> .} adjusts for Pa(M_tj), the previous mediators and
    outcome, and A_t. At stage 1 the history is the constant initial value
    and is left out. ``adjust_history=False`` drops the history terms.

    ``adjust_treatment`` adds the history to the theta_{A_t -> .}
    regressions. A_t is independent of the history, so the estimand is the
    same either way.
    """
    data = panel.stage(t)
    effects = _backdoor_effects(data, dag_t, _history_block(data, adjust_history), adjust_treatment)
    logger.debug("Stage %d within-stage effects: a_to_m=%s m_to_r=%s", t, effects.a_to_m, effects.m_to_r)
    return effects


def _backdoor_effects(
    data: StageData,
    dag: DagStructure,
    history: np.ndarray,
    adjust_treatment: bool = True,
) -> StageEffects:
    d = data.d
    treatment = np.column_stack([data.A, history]) if adjust_treatment else data.A
    a_to_r = ols(data.R, treatment).coefficients[1]
    a_to_m = np.array([ols(data.M[:, k], treatment).coefficients[1] for k in range(d)])
    m_to_r = np.empty(d)
    m_to_m = np.zeros((d, d))
    for j in range(d):
        design = np.column_stack([data.M[:, j], data.M[:, dag.parents(j)], history, data.A])
        try:
            m_to_r[j] = ols(data.R, design).coefficients[1]
            for k in dag.descendants(j):
                m_to_m[j, k] = ols(data.M[:, k], design).coefficients[1]
        except RankDeficient as e:
            raise e.with_context(stage=data.stage, mediator=j) from e
        m_to_m[j, j] = 1.0
    return StageEffects(a_to_r=float(a_to_r), a_to_m=a_to_m, m_to_r=m_to_r, m_to_m=m_to_m)


def _stage_view(panel: Panel, t: int | None, include_first_stage: bool) -> StageData:
    return panel.stage(t) if t is not None else panel.pooled(include_first_stage)


def fit_mediator_means(data: StageData) -> tuple[np.ndarray, list[OlsFit]]:
    """Regress each mediator on (1, A_t, M_{t-1}, R_{t-1}); returns residuals [n, d] and fits."""
    base = np.column_stack([data.A, data.history()])
    fits = []
    for k in range(data.d):
        try:
            fits.append(ols(data.M[:, k], base))
        except RankDeficient as e:
            raise e.with_context(stage=data.stage, mediator=k) from e
    residuals = np.column_stack([f.residuals for f in fits])
    return residuals, fits


def refit_weights(residuals: np.ndarray, dag: DagStructure) -> DagStructure:
    """Per-node OLS of each mediator residual on its parents' residuals, keeping the support."""
    W = np.zeros((dag.d, dag.d))
    for j in range(dag.d):
        parents = dag.parents(j)
        if parents:
            fit = ols(residuals[:, j], residuals[:, parents])
            W[parents, j] = fit.coefficients[1:]
    return DagStructure.from_weights(W)


def fit_sem_params(
    panel: Panel,
    dag_t: DagStructure,
    t: int | None = None,
    include_first_stage: bool = False,
) -> SemParams:
    """Fit Theta_1, Theta_2 and W at stage ``t``, or pooled over stages when ``t`` is None.

    Without observed history (stage 1) the transition terms are zero.
    """
    data = _stage_view(panel, t, include_first_stage)
    d = data.d
    residuals, mean_fits = fit_mediator_means(data)

    alpha1 = np.array([f.coefficients[0] for f in mean_fits])
    delta1 = np.array([f.coefficients[1] for f in mean_fits])
    Gamma1 = np.zeros((d, d))
    zeta1 = np.zeros(d)
    if data.has_history:
        Gamma1 = np.array([f.coefficients[2 : 2 + d] for f in mean_fits])
        zeta1 = np.array([f.coefficients[2 + d] for f in mean_fits])

    try:
        outcome = ols(data.R, np.column_stack([data.A, data.history(), data.M]))
    except RankDeficient as e:
        raise e.with_context(stage=data.stage) from e
    c = outcome.coefficients
    gamma2 = np.zeros(d)
    zeta2 = 0.0
    if data.has_history:
        gamma2 = c[2 : 2 + d]
        zeta2 = c[2 + d]
    kappa = c[-d:]

    try:
        dag = refit_weights(residuals, dag_t)
    except RankDeficient as e:
        raise e.with_context(stage=data.stage) from e

    logger.debug("Fitted SEM parameters (stage=%s, n=%d)", "pooled" if t is None else t, data.n)
    return SemParams(dag, alpha1, delta1, Gamma1, zeta1, c[0], c[1], gamma2, zeta2, kappa)


def pooled_within_stage_effects(
    panel: Panel,
    dag: DagStructure,
    include_first_stage: bool = False,
    adjust_treatment: bool = True,
) -> StageEffects:
    """Stage-invariant within-stage effects from regressions stacked over stages."""
    data = panel.pooled(include_first_stage)
    return _backdoor_effects(data, dag, data.history(), adjust_treatment)
