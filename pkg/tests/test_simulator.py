from dataclasses import replace

import numpy as np
import pytest

from dynmediation.config import NoiseFamily, TreatmentKind
from dynmediation.errors import ConfigError, DimensionMismatch
from dynmediation.model import SemParams
from dynmediation.simulator import (
    BENCHMARK_W,
    InterventionSpec,
    SimConfig,
    benchmark_params,
    sample_dag_weights,
    sample_params,
    simulate,
    simulate_intervened,
)


def _config(params, n=200, T=4, seed=5, **kwargs):
    return SimConfig(n=n, T=T, d=params[0].d, params=tuple(params), seed=seed, **kwargs)


def test_sample_dag_weights():
    W = sample_dag_weights(3, np.random.default_rng(2023))
    assert np.all(np.tril(W) == 0)
    nonzero = W[W != 0]
    assert np.all((np.abs(nonzero) >= 0.5) & (np.abs(nonzero) <= 0.9))
    assert np.all(sample_dag_weights(3, np.random.default_rng(1), edge_prob=0.0) == 0)


def test_sample_params_deterministic():
    a = sample_params(3, 4, time_varying=True, seed=11)
    b = sample_params(3, 4, time_varying=True, seed=11)
    assert len(a) == 4
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.Gamma1, q.Gamma1)
        np.testing.assert_array_equal(p.dag.weights, q.dag.weights)
        assert p.zeta2 == q.zeta2
    assert np.all(np.abs(a[0].Gamma1) <= 0.5)
    assert all(p.dag is a[0].dag for p in a)


def test_sample_params_stationary_radius():
    (p,) = sample_params(3, 1, time_varying=False, seed=4, max_spectral_radius=0.7)
    assert p.spectral_radius() <= 0.7


def test_benchmark_params_use_fixed_w():
    finite = benchmark_params(False, seed=1, T=10)
    assert len(finite) == 10
    np.testing.assert_array_equal(finite[0].dag.weights, BENCHMARK_W)
    (stationary,) = benchmark_params(True, seed=1, T=100)
    assert stationary.spectral_radius() <= 0.95


def test_simulate_is_deterministic_and_matches_empty_intervention():
    params = sample_params(2, 1, time_varying=False, seed=3)
    cfg = _config(params)
    a, b = simulate(cfg), simulate_intervened(cfg, InterventionSpec(), horizon=cfg.T)
    np.testing.assert_array_equal(a.outcomes, b.outcomes)
    np.testing.assert_array_equal(a.mediators, b.mediators)
    assert set(np.unique(a.treatments)) <= {0.0, 1.0}


def test_treatment_disconnected_interventions_coincide():
    (p,) = sample_params(2, 1, time_varying=False, seed=8)
    p = replace(p, delta1=np.zeros(2), delta2=0.0)
    cfg = _config([p])
    treated = simulate_intervened(cfg, InterventionSpec(treatment_value=1.0), horizon=cfg.T)
    control = simulate_intervened(cfg, InterventionSpec(treatment_value=0.0), horizon=cfg.T)
    np.testing.assert_array_equal(treated.outcomes, control.outcomes)
    assert np.all(treated.treatments == 1.0)


def test_mediator_intervention_fixes_value():
    params = sample_params(3, 1, time_varying=False, seed=9, weights=BENCHMARK_W)
    cfg = _config(params, T=3)
    panel = simulate_intervened(cfg, InterventionSpec(mediator_index=1, mediator_value=2.5), horizon=2)
    assert np.all(panel.mediators[:, :2, 1] == 2.5)
    assert not np.all(panel.mediators[:, 2, 1] == 2.5)
    with pytest.raises(DimensionMismatch):
        simulate_intervened(cfg, InterventionSpec(mediator_index=3), horizon=1)


def test_zero_parameters_give_pure_noise():
    cfg = _config([SemParams.zeros(2)], n=20000, T=2)
    panel = simulate(cfg)
    assert abs(panel.outcomes[:, 1].mean()) < 4.0 / np.sqrt(cfg.n)
    assert panel.mediators[:, 1, 0].std() == pytest.approx(1.0, abs=0.05)


def test_uniform_noise_and_continuous_treatment():
    cfg = _config(
        [SemParams.zeros(1)], n=5000, T=1,
        noise_family=NoiseFamily.UNIFORM, treatment_kind=TreatmentKind.CONTINUOUS,
    )
    panel = simulate(cfg)
    assert np.all(np.abs(panel.mediators) <= np.sqrt(3.0))
    assert panel.mediators.std() == pytest.approx(1.0, abs=0.05)
    assert len(np.unique(panel.treatments)) > 2


def test_burn_in_stages_are_dropped():
    params = sample_params(2, 6, time_varying=True, seed=2)
    cfg = _config(params, T=4, burn_in=2)
    panel = simulate(cfg)
    assert panel.T == 4
    assert cfg.params_at(2) is params[2]


def test_config_validation():
    params = sample_params(2, 3, time_varying=True, seed=2)
    with pytest.raises(ConfigError):
        _config(params, T=4)
    with pytest.raises(ConfigError):
        _config(params[:1], treatment_prob=1.5)
    with pytest.raises(DimensionMismatch):
        SimConfig(n=10, T=1, d=3, params=params[:1])
