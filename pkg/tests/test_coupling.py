import numpy as np
import pytest

from asyncgibbs.coupling import (CouplingRun, estimate_mixing_time, ising_params, maximal_coupling_sample,
                                 quantile_index, run_coupling_trials, run_monotone_coupling_ising, tau_sweep)
from asyncgibbs.delays import DelayModel
from asyncgibbs.distances import tv_distance
from asyncgibbs.errors import ConfigError, DimensionMismatch, InsufficientTrials, NonFerromagnetic
from asyncgibbs.graph import Factor, FactorGraph
from asyncgibbs.models import build_bias_example, build_ising, build_random_ising
from asyncgibbs.rng import RngStream


def coupon_collector_times(n, trials, seed):
    """Independent oracle: sum of geometric waiting times for each new coupon."""
    gen = np.random.default_rng(seed)
    p = (n - np.arange(n)) / n
    return gen.geometric(p, size=(trials, n)).sum(axis=1)


def test_maximal_coupling_statistics():
    p, q = np.array([0.75, 0.25]), np.array([0.25, 0.75])
    a, b = maximal_coupling_sample(p, q, np.random.default_rng(0), size=10**6)
    rate = np.mean(a != b)
    assert abs(rate - 0.5) <= 3 * np.sqrt(0.25 / 1e6)
    assert abs(np.mean(a == 0) - 0.75) <= 3 * np.sqrt(0.75 * 0.25 / 1e6)
    assert abs(np.mean(b == 0) - 0.25) <= 3 * np.sqrt(0.75 * 0.25 / 1e6)


def test_maximal_coupling_scalar_and_errors():
    a, b = maximal_coupling_sample([0.2, 0.8], [0.2, 0.8], RngStream(1))
    assert a == b
    with pytest.raises(DimensionMismatch):
        maximal_coupling_sample([0.5, 0.5], [1.0], 0)


def test_random_pairs():
    gen = np.random.default_rng(3)
    for _ in range(5):
        k = int(gen.integers(2, 6))
        p, q = gen.dirichlet(np.ones(k)), gen.dirichlet(np.ones(k))
        a, b = maximal_coupling_sample(p, q, gen, size=200_000)
        tv = tv_distance(p, q)
        assert abs(np.mean(a != b) - tv) <= 3 * np.sqrt(tv * (1 - tv) / 2e5) + 1e-12
        np.testing.assert_allclose(np.bincount(a, minlength=k) / 2e5, p, atol=4 * np.sqrt(0.25 / 2e5))


def test_isolated_spin_couples_on_first_update():
    g = FactorGraph.from_domains([2])
    run = run_monotone_coupling_ising(g, rng=RngStream(0))
    assert run.coupling_time == 1 and not run.censored


def test_beta_zero_is_coupon_collector():
    g = build_ising(50, np.zeros((0, 2)), 0.0)
    runs = run_coupling_trials(g, None, 4000, RngStream(5), continue_steps=100)
    times = np.array([r.coupling_time for r in runs])
    oracle = coupon_collector_times(50, 100_000, 0)
    assert abs(times.mean() - oracle.mean()) / oracle.mean() < 0.05
    for q in (0.25, 0.5, 0.75):
        assert abs(np.quantile(times, q) - np.quantile(oracle, q)) / np.quantile(oracle, q) < 0.05
    assert all(r.held_after for r in runs)


def test_censoring():
    g = build_random_ising(30, 3, 0.2, rng=RngStream(0))
    runs = run_coupling_trials(g, None, 120, RngStream(1), cap=5)
    assert all(r.censored and r.coupling_time == 5 for r in runs)
    est = estimate_mixing_time(runs)
    assert est.censored_count == 120 and est.censored_estimate


def test_delays_hold_after_and_reproducible():
    g = build_random_ising(40, 3, 0.2, rng=RngStream(0))
    dm = DelayModel.iid_bernoulli(0.5, 5, 40)
    a = run_coupling_trials(g, dm, 50, RngStream(2), continue_steps=500)
    b = run_coupling_trials(g, dm, 50, RngStream(2), continue_steps=500)
    assert [r.coupling_time for r in a] == [r.coupling_time for r in b]
    assert all(r.held_after for r in a)
    single = run_monotone_coupling_ising(g, dm, RngStream(2).substream(3))
    assert single.coupling_time == a[3].coupling_time


def test_quantile_definition():
    assert quantile_index(100, 0.25) == 75
    assert quantile_index(1000, 0.25) == 750
    times = list(range(1, 101))
    est = estimate_mixing_time(times, 0.25)
    # smallest t with #(T > t) <= 25
    assert est.t_hat == 75
    assert est.band[0] <= est.t_hat <= est.band[1]


def test_estimate_equivariance_and_epsilon():
    gen = np.random.default_rng(0)
    times = gen.integers(1, 10_000, size=500)
    base = estimate_mixing_time(times, 0.25).t_hat
    assert estimate_mixing_time(times * 3, 0.25).t_hat == 3 * base
    assert estimate_mixing_time(gen.permutation(times), 0.25).t_hat == base
    vals = [estimate_mixing_time(times, e).t_hat for e in (0.05, 0.1, 0.25, 0.5, 0.9)]
    assert vals == sorted(vals, reverse=True)


def test_estimate_errors():
    with pytest.raises(InsufficientTrials):
        estimate_mixing_time(range(99))
    with pytest.raises(ConfigError):
        estimate_mixing_time(range(200), epsilon=1.0)


def test_ising_params_extraction():
    g = build_ising(3, [[0, 1], [1, 2]], [0.3, 0.7], priors=[0.1, 0.0, -0.2])
    p = ising_params(g)
    np.testing.assert_allclose(p.h, [0.1, 0.0, -0.2])
    np.testing.assert_array_equal(p.nbr_ptr, [0, 1, 3, 4])
    np.testing.assert_array_equal(p.nbr, [1, 0, 2, 1])
    np.testing.assert_allclose(p.J, [0.3, 0.3, 0.7, 0.7])
    assert p.influence_bound() == pytest.approx(np.tanh(0.3) + np.tanh(0.7))


def test_non_ferromagnetic_inputs():
    with pytest.raises(NonFerromagnetic):
        ising_params(build_ising(2, [[0, 1]], -0.5))
    with pytest.raises(NonFerromagnetic):
        ising_params(FactorGraph.from_domains([3, 2]))
    with pytest.raises(NonFerromagnetic):
        ising_params(FactorGraph.from_domains([2, 2], [Factor((0, 1), fn=lambda a: a[:, 0] * 0.0)]))
    with pytest.raises(NonFerromagnetic):
        ising_params(FactorGraph.from_domains([2] * 3, [Factor((0, 1, 2), table=np.zeros((2, 2, 2)))]))
    # penalizing (0,0) alone is a repulsive coupling
    with pytest.raises(NonFerromagnetic):
        ising_params(build_bias_example())


def test_pattern_delays_rejected():
    g = build_random_ising(10, 3, 0.2, rng=RngStream(0))
    with pytest.raises(ConfigError):
        run_coupling_trials(g, DelayModel.two_thread_pattern(10), 5)


def test_tau_sweep_zero_point():
    g = build_random_ising(60, 3, 0.2, rng=RngStream(0))
    rows = tau_sweep(g, [0, 30], support_max=30, trials=200, rng=RngStream(4))
    assert rows[0].tau_star == 0 and rows[0].theory_prediction == rows[0].t_hat
    direct = estimate_mixing_time(run_coupling_trials(g, None, 200, RngStream(4))).t_hat
    assert rows[0].t_hat == direct
    assert rows[1].theory_prediction == pytest.approx(direct * (1 + 3 * np.tanh(0.2) * 30 / 60))
    assert isinstance(run_coupling_trials(g, None, 1)[0], CouplingRun)
