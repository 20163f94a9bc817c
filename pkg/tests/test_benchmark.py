from dataclasses import replace

import numpy as np
import pytest

from dynmediation.config import INFINITE_BURN_IN, Horizon, Method, SimSettings, build_analysis_config
from dynmediation.effects_infinite import report_from_stationary_params
from dynmediation.harness.benchmark import (
    SEPARATION_GAPS,
    baseline_gaps,
    benchmark_tasks,
    cell_params,
    run_benchmark,
    run_replicate,
    summarize,
    task_seed,
    true_final_eta,
)
from dynmediation.harness.io import write_benchmark_csv
from dynmediation.oracle import true_report
from dynmediation.simulator import BENCHMARK_W, SimConfig


def _config(**values):
    base = {"mode": "benchmark", "seed": 11, "n_values": [100], "T_values": [3], "reps": 3, "known_order": [0, 1, 2]}
    return build_analysis_config({**base, **values})


def _learned_config(**values):
    base = {"mode": "benchmark", "seed": 2024, "reps": 100, "threads": 4}
    return build_analysis_config({**base, **values})


def test_summarize_metrics():
    estimates = np.array([[1.0, 0.0], [3.0, 0.0]])
    bias, se, rmse = summarize(estimates, np.array([1.0, 1.0]))
    np.testing.assert_allclose(bias, [1.0, -1.0])
    np.testing.assert_allclose(se, [np.sqrt(2.0), 0.0])
    np.testing.assert_allclose(rmse, [np.sqrt(2.0), 1.0])
    assert np.all(summarize(estimates[:1], np.zeros(2))[1] == 0)


def test_cell_params_use_benchmark_dag_for_three_mediators():
    finite = cell_params(SimSettings(d=3), Horizon.FINITE, 4)
    assert len(finite) == 4
    np.testing.assert_array_equal(finite[0].dag.weights, BENCHMARK_W)
    (stationary,) = cell_params(SimSettings(d=2), Horizon.INFINITE, 50)
    assert stationary.spectral_radius() <= 0.95
    assert len(cell_params(SimSettings(d=2, burn_in=2), Horizon.FINITE, 4)) == 6


def test_true_final_eta_skips_burn_in():
    params = cell_params(SimSettings(d=2, burn_in=2), Horizon.FINITE, 3)
    np.testing.assert_allclose(true_final_eta(params, Horizon.FINITE, 3, 2), true_report(params[2:], 3).final_eta)
    (p,) = cell_params(SimSettings(d=2), Horizon.INFINITE, 20)
    np.testing.assert_allclose(true_final_eta([p], Horizon.INFINITE, 20), report_from_stationary_params(p).final_eta)


def test_task_seeds_are_distinct_and_stable():
    seeds = {task_seed(5, cell, rep) for cell in range(3) for rep in range(10)}
    assert len(seeds) == 30
    assert task_seed(5, 1, 2) == task_seed(5, 1, 2)


def test_small_grid_rows_and_identity():
    result = run_benchmark(_config())
    assert len(result.rows) == len(Method) * 3
    assert {r.mediator for r in result.rows} == {1, 2, 3}
    assert not result.failures
    for row in result.rows:
        assert row.reps == 3
        assert row.seed == 11
        assert row.identity_residual() < 1e-12
    assert result.to_frame().shape == (9, 9)


def test_single_replicate_row_equals_its_error():
    cfg = _config(reps=1, methods=["proposed"])
    result = run_benchmark(cfg)
    params = cell_params(cfg.sim, Horizon.FINITE, 3)
    sim_cfg = SimConfig.from_settings(replace(cfg.sim, n=100, T=3), params, task_seed(cfg.seed, 0, 0))
    estimate = run_replicate(sim_cfg, Method.PROPOSED, Horizon.FINITE, cfg.dag, False)
    error = estimate - result.truths[3]
    for j in range(3):
        row = result.row(Method.PROPOSED, 100, 3, j + 1)
        assert row.se == 0.0
        assert row.bias == pytest.approx(error[j], abs=1e-12)
        assert row.rmse == pytest.approx(abs(error[j]), abs=1e-12)


def test_methods_share_simulated_data():
    result = run_benchmark(_config(T_values=[1], methods=["proposed", "independent-timepoints"]))
    for j in range(1, 4):
        proposed = result.row(Method.PROPOSED, 100, 1, j)
        timepoints = result.row(Method.INDEPENDENT_TIMEPOINTS, 100, 1, j)
        assert proposed.bias == pytest.approx(timepoints.bias, abs=1e-12)
        assert proposed.se == pytest.approx(timepoints.se, abs=1e-12)


def test_output_does_not_depend_on_worker_count(tmp_path):
    serial = run_benchmark(_config(reps=2, threads=1))
    parallel = run_benchmark(_config(reps=2, threads=2))
    a = write_benchmark_csv(serial.rows, tmp_path / "serial.csv")
    b = write_benchmark_csv(parallel.rows, tmp_path / "parallel.csv")
    assert a.read_bytes() == b.read_bytes()


def test_infinite_horizon_grid():
    cfg = _config(horizon="infinite", n_values=[50], T_values=[30], reps=2, methods=["proposed"])
    result = run_benchmark(cfg)
    assert result.truths[30].shape == (3,)
    assert len(result.rows) == 3


def test_unknown_row_raises():
    result = run_benchmark(_config(reps=1, methods=["proposed"]))
    with pytest.raises(KeyError):
        result.row(Method.PROPOSED, 100, 3, 0)


def test_stationary_draw_separates_baselines():
    settings = SimSettings(d=3)
    (p,) = cell_params(settings, Horizon.INFINITE, 100)
    np.testing.assert_array_equal(p.dag.weights, BENCHMARK_W)
    assert p.spectral_radius() <= 0.9
    gaps = baseline_gaps(p, settings)
    assert gaps[0, 0] >= SEPARATION_GAPS[0]
    assert gaps[1, 1] >= SEPARATION_GAPS[1]
    (again,) = cell_params(settings, Horizon.INFINITE, 20)
    np.testing.assert_array_equal(again.kappa, p.kappa)


def test_infinite_tasks_discard_burn_in_stages():
    tasks, _, _ = benchmark_tasks(_config(horizon="infinite", n_values=[20], T_values=[100], reps=2))
    assert len(tasks) == 2 * len(Method)
    assert all(task.args[0].burn_in == INFINITE_BURN_IN for task in tasks)
    assert all(task.args[0].total_stages == 100 + INFINITE_BURN_IN for task in tasks)
    finite, _, _ = benchmark_tasks(_config(reps=1))
    assert all(task.args[0].burn_in == 0 for task in finite)
    explicit, _, _ = benchmark_tasks(_config(horizon="infinite", burn_in=8, reps=1))
    assert all(task.args[0].burn_in == 8 for task in explicit)


@pytest.mark.slow
def test_finite_benchmark_proposed_is_accurate():
    result = run_benchmark(_learned_config(n_values=[100, 500], T_values=[10], methods=["proposed"]))
    for j in range(1, 4):
        small = result.row(Method.PROPOSED, 100, 10, j)
        large = result.row(Method.PROPOSED, 500, 10, j)
        assert small.reps == large.reps == 100
        assert abs(small.bias) <= 0.02
        assert abs(large.bias) <= 0.02
        assert small.rmse <= 0.09
        assert large.rmse <= 0.05
        assert large.rmse < small.rmse


@pytest.mark.slow
def test_baselines_are_worse_on_benchmark_grid():
    result = run_benchmark(_learned_config(n_values=[500], T_values=[10], reps=50))
    rmse = {m: np.mean([result.row(m, 500, 10, j).rmse for j in (1, 2, 3)]) for m in Method}
    assert rmse[Method.PROPOSED] < rmse[Method.INDEPENDENT_TIMEPOINTS]
    assert rmse[Method.PROPOSED] < rmse[Method.INDEPENDENT_MEDIATORS]


@pytest.mark.slow
def test_infinite_benchmark_proposed_is_accurate():
    result = run_benchmark(_learned_config(horizon="infinite", n_values=[20, 100], T_values=[100], methods=["proposed"]))
    for j in range(1, 4):
        small = result.row(Method.PROPOSED, 20, 100, j)
        large = result.row(Method.PROPOSED, 100, 100, j)
        assert abs(small.bias) <= 0.03
        assert abs(large.bias) <= 0.03
        assert large.rmse < small.rmse


@pytest.mark.slow
def test_infinite_baselines_are_biased_where_proposed_is_not():
    result = run_benchmark(_learned_config(horizon="infinite", n_values=[100], T_values=[100]))
    proposed_1 = abs(result.row(Method.PROPOSED, 100, 100, 1).bias)
    proposed_2 = abs(result.row(Method.PROPOSED, 100, 100, 2).bias)
    timepoints = abs(result.row(Method.INDEPENDENT_TIMEPOINTS, 100, 100, 1).bias)
    mediators = abs(result.row(Method.INDEPENDENT_MEDIATORS, 100, 100, 2).bias)
    assert timepoints >= 0.1
    assert mediators >= 0.2
    assert timepoints >= 5 * proposed_1
    assert mediators >= 5 * proposed_2
