"""Ground truth for the estimators.

Exact total effects come from summing edge-weight products over the
stage-unrolled SEM graph (dynamic programming in topological order, or
literal path enumeration on small graphs). Interventional Monte Carlo on
the simulator gives an independent check.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Collection, Hashable, Iterable, Sequence

import networkx as nx
import numpy as np

from dynmediation.config import Horizon
from dynmediation.errors import ConfigError
from dynmediation.model import MediationReport, SemParams, report_from_increments
from dynmediation.simulator import InterventionSpec, SimConfig, simulate_intervened

logger = logging.getLogger(__name__)

MAX_LITERAL_NODES = 14
MC_CHUNK = 100_000


def treatment_node(s: int) -> tuple:
    return ("A", s)


def mediator_node(s: int, j: int) -> tuple:
    return ("M", s, j)


def outcome_node(s: int) -> tuple:
    return ("R", s)


@dataclass(frozen=True, eq=False)
class UnrolledGraph:
    """Weighted DAG over A_s, M_sj and R_s for s = 1..T.

    Edges carry ``weight`` and ``label``, the SemParams family the
    coefficient comes from. Mediator-equation edges use the structural
    coefficients (I - W^T) delta1, (I - W^T) Gamma1 and (I - W^T) zeta1.
    """
    graph: nx.DiGraph
    T: int
    d: int

    @property
    def node_count(self) -> int:
        return self.graph.number_of_nodes()

    def weight(self, u: Hashable, v: Hashable) -> float:
        return self.graph.edges[u, v]["weight"] if self.graph.has_edge(u, v) else 0.0

    def topological_nodes(self) -> list:
        return list(nx.topological_sort(self.graph))


def _add_edge(graph: nx.DiGraph, u, v, weight: float, label: str) -> None:
    if weight != 0.0:
        graph.add_edge(u, v, weight=float(weight), label=label)


def unroll(params: Sequence[SemParams], T: int) -> UnrolledGraph:
    """Unroll the per-stage SEM over T stages; ``params`` has T entries or one reused."""
    params = list(params)
    if len(params) not in (1, T):
        raise ConfigError(f"expected 1 or {T} parameter sets, got {len(params)}")
    d = params[0].d
    graph = nx.DiGraph()
    for s in range(1, T + 1):
        graph.add_node(treatment_node(s))
        graph.add_nodes_from(mediator_node(s, j) for j in range(d))
        graph.add_node(outcome_node(s))

    for s in range(1, T + 1):
        p = params[0] if len(params) == 1 else params[s - 1]
        W = p.dag.weights
        mix = np.eye(d) - W.T
        delta1 = mix @ p.delta1
        gamma1 = mix @ p.Gamma1
        zeta1 = mix @ p.zeta1
        A, R = treatment_node(s), outcome_node(s)
        _add_edge(graph, A, R, p.delta2, "delta2")
        for k in range(d):
            Mk = mediator_node(s, k)
            _add_edge(graph, A, Mk, delta1[k], "delta1")
            _add_edge(graph, Mk, R, p.kappa[k], "kappa")
            for i in range(d):
                _add_edge(graph, mediator_node(s, i), Mk, W[i, k], "W")
        if s > 1:
            R_prev = outcome_node(s - 1)
            _add_edge(graph, R_prev, R, p.zeta2, "zeta2")
            for k in range(d):
                Mk = mediator_node(s, k)
                _add_edge(graph, R_prev, Mk, zeta1[k], "zeta1")
                _add_edge(graph, mediator_node(s - 1, k), R, p.gamma2[k], "gamma2")
                for i in range(d):
                    _add_edge(graph, mediator_node(s - 1, i), Mk, gamma1[k, i], "Gamma1")
    return UnrolledGraph(graph, T, d)


def _as_nodes(nodes) -> list:
    if isinstance(nodes, tuple) and nodes and isinstance(nodes[0], str):
        return [nodes]
    return list(nodes)


def propagate(g: UnrolledGraph, sources, blocked: Collection = frozenset()) -> dict:
    """Summed path weight from any source to every node, avoiding ``blocked`` nodes."""
    sources = set(_as_nodes(sources))
    blocked = set(blocked)
    value: dict = {}
    for v in g.topological_nodes():
        if v in blocked:
            value[v] = 0.0
            continue
        total = 1.0 if v in sources else 0.0
        for u, _, w in g.graph.in_edges(v, data="weight"):
            total += value[u] * w
        value[v] = total
    return value


def _literal_total(g: UnrolledGraph, sources: Iterable, target, blocked: Collection) -> float:
    if g.node_count > MAX_LITERAL_NODES:
        raise ConfigError(f"literal path enumeration is limited to {MAX_LITERAL_NODES} nodes, graph has {g.node_count}")
    blocked = set(blocked)
    total = 0.0
    for source in sources:
        if source in blocked:
            continue
        for path in nx.all_simple_paths(g.graph, source, target):
            if blocked.intersection(path):
                continue
            total += float(np.prod([g.graph.edges[u, v]["weight"] for u, v in zip(path, path[1:])]))
    return total


def path_total_effect(
    g: UnrolledGraph,
    source,
    target,
    blocked: Collection = frozenset(),
    literal: bool = False,
) -> float:
    """Sum over directed source->target paths avoiding ``blocked`` of edge-weight products.

    ``source`` may be a single node or a collection of nodes, whose effects
    are added up. No path gives 0.
    """
    sources = _as_nodes(source)
    if target in sources:
        raise ConfigError("source and target must differ")
    if target in set(blocked):
        return 0.0
    if literal:
        return _literal_total(g, sources, target, blocked)
    return propagate(g, sources, blocked)[target]


def _mediator_contrasts(g: UnrolledGraph, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Per stage s: (Delta_j^(s), IIME_j^(s)) from two propagations."""
    T = g.T
    treatments = [treatment_node(s) for s in range(1, T + 1)]
    copies = [mediator_node(s, j) for s in range(1, T + 1)]
    total = propagate(g, treatments)
    # later copies cannot reach R_s, so blocking all of them equals blocking u <= s
    without = propagate(g, treatments, blocked=copies)
    delta = np.array([total[outcome_node(s)] - without[outcome_node(s)] for s in range(1, T + 1)])

    iime = np.empty(T)
    for s in range(1, T + 1):
        to_mediator = propagate(g, treatment_node(s))[mediator_node(s, j)]
        to_outcome = propagate(g, mediator_node(s, j))[outcome_node(s)]
        iime[s - 1] = to_mediator * to_outcome
    return delta, iime


def true_eta_finite(params: Sequence[SemParams], T: int, j: int) -> np.ndarray:
    """Exact eta_j^(t), t = 1..T: the running mean of total minus M_j-blocked effects."""
    delta, _ = _mediator_contrasts(unroll(params, T), j)
    return np.cumsum(delta) / np.arange(1, T + 1)


def true_report(params: Sequence[SemParams], T: int) -> MediationReport:
    """Exact eta, Delta, IIME and DIME for every mediator."""
    g = unroll(params, T)
    columns = [_mediator_contrasts(g, j) for j in range(g.d)]
    delta = np.column_stack([c[0] for c in columns])
    iime = np.column_stack([c[1] for c in columns])
    return report_from_increments(Horizon.FINITE, delta, iime)


def _arm_seed(seed: int, arm: int, chunk: int, shared: bool) -> int:
    key = (chunk,) if shared else (arm, chunk)
    state = np.random.SeedSequence(seed, spawn_key=key).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def mc_eta(
    params: Sequence[SemParams],
    T: int,
    j: int,
    rollouts: int,
    seed: int,
    mediator_value: float = 0.0,
    burn_in: int = 0,
    common_random_numbers: bool = False,
    chunk_size: int = MC_CHUNK,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo eta_j^(t) from four interventional arms and its standard error.

    Arms: do(A=1), do(A=0), do(A=1, M_j=m), do(A=0, M_j=m) on every stage.
    Arms use independent streams unless ``common_random_numbers`` is set, in
    which case the SE is that of the per-rollout contrast.
    """
    if rollouts < 1:
        raise ConfigError("rollouts must be >= 1")
    params = tuple(params)
    d = params[0].d
    arms = (
        (InterventionSpec(treatment_value=1.0), 1.0),
        (InterventionSpec(treatment_value=0.0), -1.0),
        (InterventionSpec(treatment_value=1.0, mediator_index=j, mediator_value=mediator_value), -1.0),
        (InterventionSpec(treatment_value=0.0, mediator_index=j, mediator_value=mediator_value), 1.0),
    )
    stages = np.arange(1, T + 1)
    sums = np.zeros((len(arms), T))
    squares = np.zeros((len(arms), T))
    contrast_sum = np.zeros(T)
    contrast_squares = np.zeros(T)

    n_chunks = -(-rollouts // chunk_size)
    for chunk in range(n_chunks):
        size = min(chunk_size, rollouts - chunk * chunk_size)
        contrast = np.zeros((size, T))
        for a, (spec, sign) in enumerate(arms):
            cfg = SimConfig(
                n=size, T=T, d=d, params=params,
                seed=_arm_seed(seed, a, chunk, common_random_numbers), burn_in=burn_in,
            )
            outcomes = simulate_intervened(cfg, spec, horizon=T).outcomes
            running = np.cumsum(outcomes, axis=1) / stages
            sums[a] += running.sum(axis=0)
            squares[a] += (running**2).sum(axis=0)
            contrast += sign * running
        contrast_sum += contrast.sum(axis=0)
        contrast_squares += (contrast**2).sum(axis=0)

    signs = np.array([sign for _, sign in arms])
    means = sums / rollouts
    estimate = signs @ means
    if common_random_numbers:
        variance = contrast_squares / rollouts - (contrast_sum / rollouts) ** 2
        se = np.sqrt(np.maximum(variance, 0.0) / rollouts)
    else:
        variances = np.maximum(squares / rollouts - means**2, 0.0)
        se = np.sqrt(variances.sum(axis=0) / rollouts)
    logger.debug("MC eta for mediator %d: %d rollouts, max se %.3g", j, rollouts, se.max())
    return estimate, se
