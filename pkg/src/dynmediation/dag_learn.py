"""Within-stage mediator DAG estimation from residualised mediators.

Two paths: per-node OLS along a known causal order, and a continuous search
that minimises a penalised least-squares score under a log-determinant
acyclicity barrier, then thresholds and breaks any leftover cycle.
"""
from __future__ import annotations

import logging

import networkx as nx
import numpy as np
import scipy.optimize

from dynmediation.config import DagLearnConfig
from dynmediation.errors import ConfigError, DimensionMismatch, NonConvergence
from dynmediation.model import DagStructure, Panel
from dynmediation.regress import fit_mediator_means, ols

logger = logging.getLogger(__name__)

# Objective value returned outside the barrier's domain; L-BFGS-B backtracks from it.
_OUTSIDE_DOMAIN = 1e12


def residualize(panel: Panel, t: int | None, include_first_stage: bool = False) -> np.ndarray:
    """M_t minus its OLS fit on (1, A_t, M_{t-1}, R_{t-1}); pooled over stages when ``t`` is None."""
    data = panel.stage(t) if t is not None else panel.pooled(include_first_stage)
    residuals, _ = fit_mediator_means(data)
    return residuals


def acyclicity(W: np.ndarray, s: float = 1.0) -> tuple[float, np.ndarray]:
    """Log-det barrier h(W) = -log det(sI - W*W) + d log s and its gradient.

    h is zero exactly on DAGs; returns (inf, None) outside the domain
    spectral_radius(W*W) < s.
    """
    d = W.shape[0]
    squared = W * W
    if d and np.max(np.abs(np.linalg.eigvals(squared))) >= s:
        return np.inf, None
    M = s * np.eye(d) - squared
    sign, logdet = np.linalg.slogdet(M)
    if sign <= 0:
        return np.inf, None
    h = -logdet + d * np.log(s)
    grad = 2.0 * W * np.linalg.inv(M).T
    return float(h), grad


def _learn_known_order(residuals: np.ndarray, order: tuple[int, ...]) -> np.ndarray:
    d = residuals.shape[1]
    if sorted(order) != list(range(d)):
        raise ConfigError(f"known_order {order} is not a permutation of 0..{d - 1}")
    W = np.zeros((d, d))
    for pos, node in enumerate(order):
        predecessors = list(order[:pos])
        if predecessors:
            W[predecessors, node] = ols(residuals[:, node], residuals[:, predecessors]).coefficients[1:]
    return W


def _learn_search(residuals: np.ndarray, cfg: DagLearnConfig) -> np.ndarray:
    X = residuals - residuals.mean(axis=0)
    n, d = X.shape
    cov = X.T @ X / n
    s = cfg.barrier_s
    off_diagonal = ~np.eye(d, dtype=bool)
    bounds = [(0.0, None) if free else (0.0, 0.0) for free in np.tile(off_diagonal.ravel(), 2)]

    def objective(z: np.ndarray, mu: float) -> tuple[float, np.ndarray]:
        W = (z[: d * d] - z[d * d :]).reshape(d, d)
        h, h_grad = acyclicity(W, s)
        if h_grad is None:
            return _OUTSIDE_DOMAIN, np.zeros_like(z)
        # 0.5/n ||X - XW||_F^2 expressed through the covariance
        residual_cov = np.eye(d) - W
        score = 0.5 * np.trace(residual_cov.T @ cov @ residual_cov)
        score_grad = -cov @ residual_cov
        value = mu * (score + cfg.l1_penalty * z.sum()) + h
        grad_w = mu * score_grad + h_grad
        grad = np.concatenate([grad_w.ravel(), -grad_w.ravel()]) + mu * cfg.l1_penalty
        return float(value), grad

    z = np.zeros(2 * d * d)
    for mu in cfg.mu_schedule:
        result = scipy.optimize.minimize(
            objective,
            z,
            args=(mu,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.max_iterations, "ftol": cfg.convergence_tol, "gtol": cfg.convergence_tol},
        )
        z = result.x
        logger.debug("DAG search mu=%g: objective=%.6g (%s)", mu, result.fun, result.message)

    W = (z[: d * d] - z[d * d :]).reshape(d, d)
    h, _ = acyclicity(W, s)
    if not h <= cfg.acyclicity_tol:
        raise NonConvergence(
            f"acyclicity h(W)={h:.3g} above tolerance {cfg.acyclicity_tol:g} after {len(cfg.mu_schedule)} barrier rounds"
        )
    return W


def _break_cycles(W: np.ndarray) -> np.ndarray:
    """Drop the weakest edge of a remaining cycle until none is left."""
    W = W.copy()
    graph = DagStructure.from_weights(W).to_networkx()
    while True:
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return W
        i, j = min(cycle, key=lambda edge: abs(W[edge[0], edge[1]]))[:2]
        logger.debug("Breaking cycle %s at edge %d->%d (|w|=%.3g)", cycle, i, j, abs(W[i, j]))
        W[i, j] = 0.0
        graph.remove_edge(i, j)


def learn_dag(residuals, cfg: DagLearnConfig | None = None) -> DagStructure:
    """Estimate the weighted mediator DAG from residuals [n, d]; the result is always acyclic."""
    cfg = cfg or DagLearnConfig()
    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim != 2:
        raise DimensionMismatch(f"residuals must be [n, d], got shape {residuals.shape}")
    n, d = residuals.shape
    if n < d + 1:
        raise DimensionMismatch(f"need at least d + 1 = {d + 1} rows, got {n}")
    if d == 1:
        return DagStructure.empty(1)

    if cfg.known_order is not None:
        W = _learn_known_order(residuals, tuple(cfg.known_order))
    else:
        W = _learn_search(residuals, cfg)

    W[np.abs(W) < cfg.weight_threshold] = 0.0
    dag = DagStructure.from_weights(_break_cycles(W))
    logger.debug("Learned DAG with %d edge(s) from %d rows", dag.n_edges, n)
    return dag


def learn_stage_dag(
    panel: Panel,
    t: int | None,
    cfg: DagLearnConfig | None = None,
    include_first_stage: bool = False,
) -> DagStructure:
    return learn_dag(residualize(panel, t, include_first_stage), cfg)
