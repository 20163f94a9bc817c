"""Domain types shared by all modules.

Stages are numbered from 1 in every public signature (``stage t``), while
array axes are 0-based: stage ``t`` lives at index ``t - 1``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import networkx as nx
import numpy as np

from dynmediation.config import Horizon
from dynmediation.errors import CyclicGraph, DimensionMismatch, NonFiniteValue

logger = logging.getLogger(__name__)

# Learned weights below this magnitude are structural zeros.
STRUCTURAL_ZERO = 1e-8


def _frozen(array, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Panel:
    """n subjects observed over T stages: treatment, d mediators, outcome."""
    n: int
    T: int
    d: int
    treatments: np.ndarray  # [n, T]
    mediators: np.ndarray  # [n, T, d]
    outcomes: np.ndarray  # [n, T]
    subject_ids: tuple | None = None

    @classmethod
    def from_arrays(cls, treatments, mediators, outcomes, subject_ids: Sequence | None = None) -> "Panel":
        mediators = np.asarray(mediators, dtype=float)
        if mediators.ndim == 2:
            mediators = mediators[:, :, None]
        if mediators.ndim != 3:
            raise DimensionMismatch(f"mediators must be [n, T, d], got shape {mediators.shape}")
        n, T, d = mediators.shape
        ids = tuple(subject_ids) if subject_ids is not None else None
        return validate_panel(cls(n, T, d, np.asarray(treatments, float), mediators, np.asarray(outcomes, float), ids))

    def stage(self, t: int) -> "StageData":
        """Regression view of stage ``t`` (1-based) with its history."""
        if not 1 <= t <= self.T:
            raise DimensionMismatch(f"stage {t} outside 1..{self.T}")
        i = t - 1
        has_history = t > 1
        return StageData(
            A=self.treatments[:, i],
            M=self.mediators[:, i, :],
            R=self.outcomes[:, i],
            M_prev=self.mediators[:, i - 1, :] if has_history else None,
            R_prev=self.outcomes[:, i - 1] if has_history else None,
            stage=t,
        )

    def pooled(self, include_first_stage: bool = False) -> "StageData":
        """Stack all stages into one regression view.

        Stage 1 has constant initial values as history; it is only stacked
        when ``include_first_stage`` is set, with zero history columns.
        """
        first = 0 if include_first_stage else 1
        if self.T - first < 1:
            raise DimensionMismatch("pooling needs at least two stages")
        A = self.treatments[:, first:].T.reshape(-1)
        M = self.mediators[:, first:, :].transpose(1, 0, 2).reshape(-1, self.d)
        R = self.outcomes[:, first:].T.reshape(-1)
        M_prev_full = np.concatenate([np.zeros((self.n, 1, self.d)), self.mediators[:, :-1, :]], axis=1)
        R_prev_full = np.concatenate([np.zeros((self.n, 1)), self.outcomes[:, :-1]], axis=1)
        M_prev = M_prev_full[:, first:, :].transpose(1, 0, 2).reshape(-1, self.d)
        R_prev = R_prev_full[:, first:].T.reshape(-1)
        return StageData(A=A, M=M, R=R, M_prev=M_prev, R_prev=R_prev, stage=None)

    def take_subjects(self, indices: Sequence[int]) -> "Panel":
        """Rows ``indices`` (repeats allowed), whole trajectories kept together."""
        idx = np.asarray(indices, dtype=int)
        ids = tuple(self.subject_ids[i] for i in idx) if self.subject_ids is not None else None
        return Panel(
            len(idx), self.T, self.d,
            _frozen(self.treatments[idx]), _frozen(self.mediators[idx]), _frozen(self.outcomes[idx]), ids,
        )

    def drop_stages(self, count: int) -> "Panel":
        if count <= 0:
            return self
        if count >= self.T:
            raise DimensionMismatch(f"cannot drop {count} of {self.T} stages")
        return Panel(
            self.n, self.T - count, self.d,
            _frozen(self.treatments[:, count:]), _frozen(self.mediators[:, count:, :]),
            _frozen(self.outcomes[:, count:]), self.subject_ids,
        )


def validate_panel(raw: Panel) -> Panel:
    """Check extents and finiteness; return an immutable float64 panel."""
    A = np.asarray(raw.treatments, dtype=float)
    M = np.asarray(raw.mediators, dtype=float)
    R = np.asarray(raw.outcomes, dtype=float)
    if raw.d < 1:
        raise DimensionMismatch(f"mediator count must be >= 1, got {raw.d}")
    if A.shape != (raw.n, raw.T):
        raise DimensionMismatch(f"treatments shape {A.shape} != ({raw.n}, {raw.T})")
    if R.shape != (raw.n, raw.T):
        raise DimensionMismatch(f"outcomes shape {R.shape} != ({raw.n}, {raw.T})")
    if M.shape != (raw.n, raw.T, raw.d):
        raise DimensionMismatch(f"mediators shape {M.shape} != ({raw.n}, {raw.T}, {raw.d})")
    if raw.subject_ids is not None and len(raw.subject_ids) != raw.n:
        raise DimensionMismatch(f"{len(raw.subject_ids)} subject ids for {raw.n} subjects")

    for name, values in (("treatment", A), ("mediator", M), ("outcome", R)):
        bad = ~np.isfinite(values)
        if bad.any():
            subject, stage = np.argwhere(bad)[0][:2]
            raise NonFiniteValue(int(subject), int(stage), name)

    return Panel(raw.n, raw.T, raw.d, _frozen(A), _frozen(M), _frozen(R), raw.subject_ids)


@dataclass(frozen=True, eq=False)
class StageData:
    """Columns used by the per-stage (or pooled) regressions.

    ``M_prev``/``R_prev`` are None when the stage has no observed history
    (stage 1, whose history is the constant initial value).
    """
    A: np.ndarray
    M: np.ndarray
    R: np.ndarray
    M_prev: np.ndarray | None
    R_prev: np.ndarray | None
    stage: int | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.M.shape[1]

    @property
    def has_history(self) -> bool:
        return self.M_prev is not None

    def history(self) -> np.ndarray:
        """[M_{t-1}, R_{t-1}] columns, or an empty block without history."""
        if not self.has_history:
            return np.empty((self.n, 0))
        return np.column_stack([self.M_prev, self.R_prev])

    def without_history(self) -> "StageData":
        return replace(self, M_prev=None, R_prev=None)


@dataclass(frozen=True, eq=False)
class DagStructure:
    """Weighted adjacency of the within-stage mediator DAG.

    ``weights[i, j]`` is the coefficient of M_i in the equation of M_j, so
    M_i is a parent of M_j iff ``adjacency[i, j]``.
    """
    d: int
    adjacency: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        adjacency = np.asarray(self.adjacency, dtype=bool)
        weights = np.asarray(self.weights, dtype=float)
        if adjacency.shape != (self.d, self.d) or weights.shape != (self.d, self.d):
            raise DimensionMismatch(f"DAG matrices must be {self.d}x{self.d}")
        if np.any(np.diag(adjacency)) or np.any(np.diag(weights) != 0):
            raise DimensionMismatch("DAG diagonal must be zero")
        if np.any((weights != 0) != adjacency):
            raise DimensionMismatch("weights must be nonzero exactly on the adjacency support")
        object.__setattr__(self, "adjacency", _frozen(adjacency, bool))
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def from_weights(cls, weights, tol: float = STRUCTURAL_ZERO) -> "DagStructure":
        W = np.array(weights, dtype=float)
        np.fill_diagonal(W, 0.0)
        W[np.abs(W) < tol] = 0.0
        return cls(W.shape[0], W != 0, W)

    @classmethod
    def empty(cls, d: int) -> "DagStructure":
        return cls(d, np.zeros((d, d), bool), np.zeros((d, d)))

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())

    def parents(self, j: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.adjacency[:, j])]

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.d))
        for i, j in zip(*np.nonzero(self.adjacency)):
            graph.add_edge(int(i), int(j), weight=float(self.weights[i, j]))
        return graph

    def descendants(self, j: int) -> set[int]:
        return set(nx.descendants(self.to_networkx(), j))

    def permuted(self, order: Sequence[int]) -> "DagStructure":
        """Relabel so that new node k is old node ``order[k]``."""
        idx = np.asarray(order, dtype=int)
        return DagStructure(self.d, self.adjacency[np.ix_(idx, idx)], self.weights[np.ix_(idx, idx)])

    def total_effects(self) -> np.ndarray:
        """Row j holds the total effect of M_j on every mediator, i.e. (I - W)^-1."""
        return np.linalg.solve(np.eye(self.d) - self.weights, np.eye(self.d))


def topological_order(dag: DagStructure) -> tuple[int, ...]:
    """0-based order in which every edge points forward; identity when unconstrained."""
    graph = dag.to_networkx()
    try:
        return tuple(nx.lexicographical_topological_sort(graph))
    except nx.NetworkXUnfeasible as e:
        raise CyclicGraph(nx.find_cycle(graph)) from e


@dataclass(frozen=True, eq=False)
class SemParams:
    """Per-stage parameters of the mediator and outcome equations.

    mu_t = alpha1 + delta1 A_t + Gamma1 M_{t-1} + zeta1 R_{t-1}
    M_t - mu_t = W^T (M_t - mu_t) + eps_w
    R_t = alpha2 + delta2 A_t + gamma2^T M_{t-1} + zeta2 R_{t-1} + kappa^T M_t + eps_r
    """
    dag: DagStructure
    alpha1: np.ndarray
    delta1: np.ndarray
    Gamma1: np.ndarray
    zeta1: np.ndarray
    alpha2: float
    delta2: float
    gamma2: np.ndarray
    zeta2: float
    kappa: np.ndarray

    def __post_init__(self):
        d = self.dag.d
        for name in ("alpha1", "delta1", "zeta1", "gamma2", "kappa"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (d,):
                raise DimensionMismatch(f"{name} must have shape ({d},), got {value.shape}")
            object.__setattr__(self, name, _frozen(value))
        gamma = np.asarray(self.Gamma1, dtype=float)
        if gamma.shape != (d, d):
            raise DimensionMismatch(f"Gamma1 must have shape ({d}, {d}), got {gamma.shape}")
        object.__setattr__(self, "Gamma1", _frozen(gamma))
        for name in ("alpha2", "delta2", "zeta2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def d(self) -> int:
        return self.dag.d

    @classmethod
    def zeros(cls, d: int, dag: DagStructure | None = None) -> "SemParams":
        z = np.zeros(d)
        return cls(dag or DagStructure.empty(d), z, z, np.zeros((d, d)), z, 0.0, 0.0, z, 0.0, z)

    def contemporaneous_block(self) -> np.ndarray:
        """B6: the (d+1)x(d+1) map of (M_t, R_t) onto itself, only kappa^T in the last row."""
        d = self.d
        block = np.zeros((d + 1, d + 1))
        block[d, :d] = self.kappa
        return block

    def lagged_block(self) -> np.ndarray:
        """B7: the map of (M_{t-1}, R_{t-1}) onto (M_t, R_t)."""
        d = self.d
        block = np.zeros((d + 1, d + 1))
        block[:d, :d] = self.Gamma1
        block[:d, d] = self.zeta1
        block[d, :d] = self.gamma2
        block[d, d] = self.zeta2
        return block

    def transition_matrix(self) -> np.ndarray:
        """One-step companion matrix (I - B6)^-1 B7 of the mean (M_t, R_t) process."""
        d = self.d
        return np.linalg.solve(np.eye(d + 1) - self.contemporaneous_block(), self.lagged_block())

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.transition_matrix()))))

    def permuted(self, order: Sequence[int]) -> "SemParams":
        idx = np.asarray(order, dtype=int)
        return SemParams(
            self.dag.permuted(idx), self.alpha1[idx], self.delta1[idx], self.Gamma1[np.ix_(idx, idx)],
            self.zeta1[idx], self.alpha2, self.delta2, self.gamma2[idx], self.zeta2, self.kappa[idx],
        )


@dataclass(frozen=True, eq=False)
class StageEffects:
    """Within-stage slice of the effect table for one stage t.

    ``m_to_m[j]`` is theta_{M_tj -> M_t}; ``m_to_r[j]`` is theta_{M_tj -> R_t}.
    """
    a_to_r: float
    a_to_m: np.ndarray
    m_to_r: np.ndarray
    m_to_m: np.ndarray

    @property
    def d(self) -> int:
        return self.a_to_m.shape[0]


@dataclass(frozen=True, eq=False)
class EffectTable:
    """Total effects theta between stage pairs s <= t (NaN where not populated).

    Axes: [s, t] for a_to_r, [s, t, k] for a_to_m, [s, t, j] for m_to_r and
    [s, t, j, k] for m_to_m, all 0-based stage indices.
    """
    a_to_r: np.ndarray
    a_to_m: np.ndarray
    m_to_r: np.ndarray
    m_to_m: np.ndarray

    @classmethod
    def allocate(cls, T: int, d: int) -> "EffectTable":
        """Writable all-NaN table for a single writer; call ``freeze`` when filled."""
        return cls(
            np.full((T, T), np.nan),
            np.full((T, T, d), np.nan),
            np.full((T, T, d), np.nan),
            np.full((T, T, d, d), np.nan),
        )

    @classmethod
    def empty(cls, T: int, d: int) -> "EffectTable":
        return cls.allocate(T, d).freeze()

    @property
    def T(self) -> int:
        return self.a_to_r.shape[0]

    @property
    def d(self) -> int:
        return self.a_to_m.shape[2]

    def _arrays(self) -> tuple[np.ndarray, ...]:
        return self.a_to_r, self.a_to_m, self.m_to_r, self.m_to_m

    def freeze(self) -> "EffectTable":
        for array in self._arrays():
            array.setflags(write=False)
        return self

    def copy(self) -> "EffectTable":
        """Writable copy."""
        return EffectTable(*(np.array(a, copy=True) for a in self._arrays()))

    def with_within_stage(self, t: int, effects: StageEffects, in_place: bool = False) -> "EffectTable":
        table = self if in_place else self.copy()
        i = t - 1
        table.a_to_r[i, i] = effects.a_to_r
        table.a_to_m[i, i] = effects.a_to_m
        table.m_to_r[i, i] = effects.m_to_r
        table.m_to_m[i, i] = effects.m_to_m
        return table

    def within_stage(self, t: int) -> StageEffects:
        i = t - 1
        return StageEffects(
            float(self.a_to_r[i, i]), self.a_to_m[i, i].copy(), self.m_to_r[i, i].copy(), self.m_to_m[i, i].copy()
        )

    def is_populated(self, t: int) -> bool:
        """True when every quantity with target stage ``t`` is finite."""
        i = t - 1
        return bool(
            np.isfinite(self.a_to_r[: i + 1, i]).all()
            and np.isfinite(self.a_to_m[: i + 1, i]).all()
            and np.isfinite(self.m_to_r[: i + 1, i]).all()
            and np.isfinite(self.m_to_m[: i + 1, i]).all()
        )


@dataclass(frozen=True, eq=False)
class MediationReport:
    """Individual mediation effects per stage (rows) and mediator (columns).

    For the infinite horizon there is a single row holding the limits, with
    delta equal to eta.
    """
    horizon: Horizon
    eta: np.ndarray
    iime: np.ndarray
    dime: np.ndarray
    delta: np.ndarray
    bootstrap_se: dict[str, np.ndarray] | None = None
    effect_table: EffectTable | None = None
    dags: tuple[DagStructure, ...] = field(default=())

    @property
    def T(self) -> int:
        return self.eta.shape[0]

    @property
    def d(self) -> int:
        return self.eta.shape[1]

    @property
    def final_eta(self) -> np.ndarray:
        """eta_j^(T) for finite horizons, eta_j^(inf) for the infinite one."""
        return self.eta[-1]

    def identity_residuals(self) -> tuple[float, float]:
        """Max violation of the telescoping and IIME/DIME identities."""
        t = np.arange(1, self.T + 1)[:, None]
        previous = np.vstack([np.zeros((1, self.d)), self.eta[:-1]])
        telescoping = t * self.eta - (t - 1) * previous - self.delta
        split = self.delta - self.iime - self.dime
        return float(np.abs(telescoping).max()), float(np.abs(split).max())

    def with_bootstrap(self, se: dict[str, np.ndarray]) -> "MediationReport":
        return replace(self, bootstrap_se=se)


def report_from_increments(
    horizon: Horizon,
    delta: np.ndarray,
    iime: np.ndarray,
    eta: np.ndarray | None = None,
    **extra,
) -> MediationReport:
    """Build a report from Delta_j^(t) and IIME_j^(t); eta defaults to their running mean."""
    delta = np.asarray(delta, dtype=float)
    iime = np.asarray(iime, dtype=float)
    if eta is None:
        t = np.arange(1, delta.shape[0] + 1)[:, None]
        eta = np.cumsum(delta, axis=0) / t
    return MediationReport(horizon, _frozen(eta), _frozen(iime), _frozen(delta - iime), _frozen(delta), **extra)
