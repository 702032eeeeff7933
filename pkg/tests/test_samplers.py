import os

import numpy as np
import pytest

from asyncgibbs.delays import DelayModel
from asyncgibbs.distances import sparse_variation_distance, tv_distance
from asyncgibbs.errors import ConfigError
from asyncgibbs.graph import Factor, FactorGraph, exact_distribution
from asyncgibbs.models import build_bias_example, build_random_ising
from asyncgibbs.oracles import markov_chi2, sequential_oracle, two_thread_oracle
from asyncgibbs.rng import RngStream
from asyncgibbs.samplers import (run_hogwild_parallel, run_hogwild_simulated, run_multimodel,
                                 run_sequential)
from asyncgibbs.sinks import SampleSink

from conftest import random_table_model


def as_callback(g: FactorGraph) -> FactorGraph:
    """Same model with every table replaced by a lookup callback (forces the Python path)."""
    fs = []
    for f in g.factors:
        fs.append(Factor(f.scope, fn=lambda a, t=f.table: t[tuple(a.T)]))
    return FactorGraph.from_domains(g.domain_sizes, fs)


def test_zero_delay_reproduces_sequential_exactly():
    g = random_table_model(11)
    sink = SampleSink.trace(burn_in=0)
    a = run_sequential(g, 5000, None, RngStream(3), sink)
    b = run_hogwild_simulated(g, 5000, None, DelayModel.zero(g.n), RngStream(3), sink)
    np.testing.assert_array_equal(a.trace, b.trace)


@pytest.mark.parametrize("delay", [None, DelayModel.iid_bernoulli(0.5, 2, 3),
                                   DelayModel.two_thread_pattern(3, async_vars=[0, 2])])
def test_python_path_matches_kernel(delay):
    g = random_table_model(5)
    while g.n < 3:
        g = random_table_model(g.n + 40)
    sink = SampleSink.trace(burn_in=0)
    if delay is None:
        a = run_sequential(g, 3000, None, RngStream(9), sink)
        b = run_sequential(as_callback(g), 3000, None, RngStream(9), sink)
    else:
        a = run_hogwild_simulated(g, 3000, None, delay, RngStream(9), sink)
        b = run_hogwild_simulated(as_callback(g), 3000, None, delay, RngStream(9), sink)
    np.testing.assert_array_equal(a.trace, b.trace)


def test_sequential_bias_example_against_exact():
    g = build_bias_example()
    e = run_sequential(g, 400_000, [1, 1], RngStream(2))
    res = markov_chi2(e.counts, sequential_oracle(g, [1, 1]))
    assert res.pvalue > 0.001
    assert e.counts[0, 0] == 0
    np.testing.assert_allclose(sequential_oracle(g).recorded_stationary(),
                               exact_distribution(g).probabilities.ravel(), atol=1e-12)


def test_two_thread_pattern_bias_distances():
    # sequential vs two-thread histograms: large joint TV, small one-variable marginal gap
    g = build_bias_example()
    seq = run_sequential(g, 1_000_000, [1, 1], RngStream(5))
    hog = run_hogwild_simulated(g, 1_000_000, [1, 1], DelayModel.two_thread_pattern(2), RngStream(6))
    tv = tv_distance(seq.counts, hog.counts)
    sv = sparse_variation_distance(seq.counts, hog.counts, 1, 2)
    assert abs(tv - 0.098) <= 0.03
    assert abs(sv - 0.004) <= 0.01
    assert markov_chi2(hog.counts, two_thread_oracle(g, None, [1, 1])).pvalue > 0.001


def test_burn_in_and_counts():
    g = build_bias_example()
    e = run_sequential(g, 20_000, [1, 1], RngStream(0), SampleSink.joint(burn_in=500))
    assert e.total == 19_500
    e = run_sequential(g, 20_000, [1, 1], RngStream(0))
    assert e.total == 20_000 - 1000
    assert e.meta["burn_in"] == 1000


def test_initial_state_is_validated():
    g = build_bias_example()
    with pytest.raises(ConfigError):
        run_sequential(g, 10, [2, 0])
    with pytest.raises(ConfigError):
        run_sequential(g, 0)


def test_marginal_and_event_sinks():
    g = random_table_model(21)
    while g.n < 3:
        g = random_table_model(g.n + 77)
    joint = run_sequential(g, 50_000, None, RngStream(1))
    marg = run_sequential(g, 50_000, None, RngStream(1), SampleSink.marginals([(0,), (2, 1)]))
    np.testing.assert_array_equal(marg.tables[(0,)], joint.marginal_counts([0]))
    np.testing.assert_array_equal(marg.tables[(2, 1)], joint.marginal_counts([2, 1]))
    ev = run_sequential(g, 50_000, None, RngStream(1), SampleSink.event([0, 1], lambda v: v[0] == v[1]))
    c = joint.marginal_counts([0, 1])
    d = min(c.shape)
    assert ev.event_count == sum(c[k, k] for k in range(d))


def test_thinned_trace_stride():
    g = build_bias_example()
    full = run_sequential(g, 10_000, [1, 1], RngStream(8), SampleSink.trace(burn_in=100))
    thin = run_sequential(g, 10_000, [1, 1], RngStream(8), SampleSink.trace(stride=7, burn_in=100))
    np.testing.assert_array_equal(full.trace[::7], thin.trace)


def test_single_worker_parallel_matches_sequential():
    g = random_table_model(4)
    sink = SampleSink.joint(burn_in=1000)
    seq = run_sequential(g, 30_000, None, RngStream(12), sink)
    par = run_hogwild_parallel(g, 30_000, None, 1, sink, RngStream(12))
    mm = run_multimodel(g, 30_000, 1, sink, None, RngStream(12))
    np.testing.assert_array_equal(seq.counts, par.distribution.counts)
    np.testing.assert_array_equal(seq.counts, mm.distribution.counts)
    assert par.throughput > 0


def test_parallel_accounting():
    g = build_random_ising(200, 3, 0.2, rng=RngStream(0))
    sink = SampleSink.marginals([(0,)], burn_in=0)
    r = run_hogwild_parallel(g, 100_001, workers=3, sink=sink, rng=RngStream(1))
    assert r.distribution.total == 100_001
    m = run_multimodel(g, 100_001, workers=3, sink=sink, rng=RngStream(1))
    assert m.distribution.total == 100_001
    assert m.state_bytes == 3 * r.state_bytes
    with pytest.raises(ConfigError):
        run_hogwild_parallel(g, 10, workers=0)


@pytest.mark.skipif((os.cpu_count() or 1) < 2, reason="needs at least two cores for real races")
def test_parallel_races_bias_example():
    g = build_bias_example()
    r = run_hogwild_parallel(g, 5_000_000, [1, 1], workers=2, rng=RngStream(3))
    assert r.distribution.counts[0, 0] > 0
