from dataclasses import replace

import numpy as np
import pytest

from dynmediation.baselines import (
    estimate_independent_mediators,
    estimate_independent_timepoints,
    estimate_with,
    independent_mediators_limit,
    independent_timepoints_limit,
    stationary_covariance,
)
from dynmediation.config import DagLearnConfig, Horizon, Method
from dynmediation.effects_finite import estimate_finite, report_from_params
from dynmediation.effects_infinite import estimate_infinite, report_from_stationary_params
from dynmediation.model import DagStructure
from dynmediation.simulator import BENCHMARK_W, SimConfig, sample_params, simulate

KNOWN = DagLearnConfig(known_order=(0, 1, 2))


def _panel(params, n=2000, T=None, seed=1):
    T = T or len(params)
    return simulate(SimConfig(n=n, T=T, d=params[0].d, params=tuple(params), seed=seed))


def _no_transition(p):
    z = np.zeros(p.d)
    return replace(p, Gamma1=np.zeros((p.d, p.d)), zeta1=z, gamma2=z, zeta2=0.0)


def test_single_stage_timepoints_equal_proposed():
    params = sample_params(3, 1, time_varying=True, seed=1, weights=BENCHMARK_W)
    panel = _panel(params)
    baseline = estimate_independent_timepoints(panel, KNOWN)
    proposed = estimate_finite(panel, KNOWN)
    np.testing.assert_allclose(baseline.eta, proposed.eta, atol=1e-12)


def test_timepoints_have_no_carryover():
    params = sample_params(3, 4, time_varying=True, seed=2, weights=BENCHMARK_W)
    report = estimate_independent_timepoints(_panel(params), KNOWN)
    np.testing.assert_array_equal(report.delta, report.iime)
    np.testing.assert_array_equal(report.dime, 0.0)
    np.testing.assert_allclose(report.eta[-1], report.delta.mean(axis=0))


def test_timepoints_infinite_row_averages_stages_after_the_first():
    params = sample_params(3, 5, time_varying=True, seed=3, weights=BENCHMARK_W)
    panel = _panel(params)
    finite = estimate_independent_timepoints(panel, KNOWN)
    infinite = estimate_independent_timepoints(panel, KNOWN, Horizon.INFINITE)
    assert infinite.horizon is Horizon.INFINITE
    np.testing.assert_allclose(infinite.final_eta, finite.delta[1:].mean(axis=0), atol=1e-12)
    single = estimate_independent_timepoints(_panel(params[:1]), KNOWN, Horizon.INFINITE)
    np.testing.assert_allclose(single.final_eta, single.delta[0], atol=1e-12)


def test_independent_mediators_learn_no_edges():
    params = sample_params(3, 3, time_varying=True, seed=4, weights=BENCHMARK_W)
    report = estimate_independent_mediators(_panel(params))
    assert [dag.n_edges for dag in report.dags] == [0, 0, 0]


def test_dispatch_matches_direct_calls():
    params = sample_params(3, 3, time_varying=True, seed=5, weights=BENCHMARK_W)
    panel = _panel(params, n=500)
    pairs = [
        (Method.PROPOSED, estimate_finite(panel, KNOWN)),
        (Method.INDEPENDENT_TIMEPOINTS, estimate_independent_timepoints(panel, KNOWN)),
        (Method.INDEPENDENT_MEDIATORS, estimate_finite(panel, KNOWN, ignore_mediator_dependence=True)),
    ]
    for method, expected in pairs:
        np.testing.assert_array_equal(estimate_with(method, panel, Horizon.FINITE, KNOWN).eta, expected.eta)


def test_dispatch_infinite_horizon():
    (p,) = sample_params(3, 1, time_varying=False, seed=6, weights=BENCHMARK_W, max_spectral_radius=0.7)
    panel = _panel([p], n=200, T=20)
    got = estimate_with(Method.PROPOSED, panel, Horizon.INFINITE, KNOWN)
    np.testing.assert_array_equal(got.eta, estimate_infinite(panel, KNOWN).eta)
    ignored = estimate_with(Method.INDEPENDENT_MEDIATORS, panel, Horizon.INFINITE, KNOWN)
    assert ignored.dags[0].n_edges == 0


def test_timepoints_are_consistent_without_transitions():
    params = [_no_transition(p) for p in sample_params(3, 3, time_varying=True, seed=7, weights=BENCHMARK_W)]
    truth = report_from_params(params)
    report = estimate_independent_timepoints(_panel(params, n=20_000), KNOWN)
    np.testing.assert_allclose(report.eta, truth.eta, atol=0.05)


def test_independent_mediators_are_consistent_without_dag():
    params = [replace(p, dag=DagStructure.empty(3)) for p in sample_params(3, 3, time_varying=True, seed=8)]
    truth = report_from_params(params)
    report = estimate_independent_mediators(_panel(params, n=20_000))
    np.testing.assert_allclose(report.eta, truth.eta, atol=0.08)


@pytest.mark.slow
def test_proposed_beats_baselines_on_benchmark_instance():
    params = sample_params(3, 10, time_varying=True, seed=2023, weights=BENCHMARK_W)
    truth = report_from_params(params).final_eta
    errors = {method: [] for method in Method}
    for seed in range(20):
        panel = _panel(params, n=2000, seed=100 + seed)
        for method in Method:
            eta = estimate_with(method, panel, Horizon.FINITE).final_eta
            errors[method].append((eta - truth) ** 2)
    rmse = {method: np.sqrt(np.mean(values, axis=0)).mean() for method, values in errors.items()}
    assert rmse[Method.PROPOSED] < rmse[Method.INDEPENDENT_TIMEPOINTS]
    assert rmse[Method.PROPOSED] < rmse[Method.INDEPENDENT_MEDIATORS]


def _stationary(seed, radius=0.8):
    (p,) = sample_params(3, 1, time_varying=False, seed=seed, weights=BENCHMARK_W, max_spectral_radius=radius)
    return p


def test_stationary_covariance_is_a_fixed_point():
    p = _stationary(11)
    cov = stationary_covariance(p, 0.25)
    d = p.d
    lift = np.linalg.inv(np.eye(d + 1) - p.contemporaneous_block())
    transition = lift @ p.lagged_block()
    state = cov[: d + 1, : d + 1]
    g = np.append(p.delta1, p.delta2)
    total = p.dag.total_effects()
    noise = np.zeros((d + 1, d + 1))
    noise[:d, :d] = total.T @ total
    noise[d, d] = 1.0
    expected = transition @ state @ transition.T + lift @ (0.25 * np.outer(g, g) + noise) @ lift.T
    np.testing.assert_allclose(state, expected, atol=1e-10)
    np.testing.assert_allclose(cov, cov.T, atol=1e-12)
    np.testing.assert_allclose(cov[:d, d + 1], 0.25 * p.delta1, atol=1e-12)


def test_mediator_limit_is_exact_without_dag():
    p = replace(_stationary(12), dag=DagStructure.empty(3))
    truth = report_from_stationary_params(p).final_eta
    np.testing.assert_allclose(independent_mediators_limit(p), truth, atol=1e-10)


def test_timepoint_limit_is_exact_without_transitions():
    p = _no_transition(_stationary(13))
    truth = report_from_stationary_params(p).final_eta
    np.testing.assert_allclose(independent_timepoints_limit(p, 0.25), truth, atol=1e-10)


@pytest.mark.slow
def test_baselines_converge_to_their_limits():
    p = _stationary(14)
    panel = simulate(SimConfig(n=20_000, T=12, d=3, params=(p,), seed=3, burn_in=60))
    timepoints = estimate_independent_timepoints(panel, KNOWN, Horizon.INFINITE).final_eta
    np.testing.assert_allclose(timepoints, independent_timepoints_limit(p, 0.25), atol=0.03)
    mediators = estimate_independent_mediators(panel, horizon=Horizon.INFINITE).final_eta
    np.testing.assert_allclose(mediators, independent_mediators_limit(p), atol=0.05)
