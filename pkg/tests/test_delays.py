import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncgibbs.delays import DelayModel, build_maxent_delay, max_tau_star, tau_star_of
from asyncgibbs.errors import ConfigError, UnattainableTauStar
from asyncgibbs.rng import RngStream


def entropy(p):
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def test_simple_laws():
    z = DelayModel.zero(10)
    assert z.reported_tau == 0 and z.reported_tau_star == 0 and z.support_max == 0
    c = DelayModel.constant(3, 10)
    assert c.reported_tau == 3
    assert c.reported_tau_star == pytest.approx(10 * (math.exp(0.3) - 1))
    b = DelayModel.iid_bernoulli(0.5, 1, 2)
    assert b.reported_tau == 0.5
    assert b.reported_tau_star == pytest.approx(2 * 0.5 * (math.exp(0.5) - 1))
    np.testing.assert_allclose(b.cdf, [0.5, 1.0])


def test_pattern_reports_unit_delay():
    p = DelayModel.two_thread_pattern(4, async_vars=[0, 1])
    assert p.is_pattern and p.reported_tau == 1.0
    assert p.reported_tau_star == pytest.approx(4 * math.expm1(0.25))
    with pytest.raises(ConfigError):
        p.sample(3, RngStream(0))


def test_invalid_laws():
    with pytest.raises(ConfigError):
        DelayModel.iid_bernoulli(1.5, 1)
    with pytest.raises(ConfigError):
        DelayModel.constant(-1)
    with pytest.raises(ConfigError):
        DelayModel.from_pmf("zero", [0.5, 0.6], 1)
    with pytest.raises(ConfigError):
        DelayModel.from_dict({"kind": "bogus"}, 3)
    with pytest.raises(ConfigError):
        DelayModel.from_dict({"kind": "constant"}, 3)


def test_from_dict_round_trip():
    for d in [{"kind": "zero"}, {"kind": "constant", "k": 2}, {"kind": "iid-bernoulli", "rho": 0.25, "k": 3},
              {"kind": "maxent", "support_max": 20, "tau_star": 5.0}, {"kind": "two-thread-pattern"}]:
        m = DelayModel.from_dict(d, 50)
        assert m.kind == d["kind"]


def test_sampling_follows_pmf():
    m = DelayModel.iid_bernoulli(0.3, 2, 5)
    s = m.sample(200_000, RngStream(4))
    assert abs((s == 2).mean() - 0.3) < 0.005
    assert set(np.unique(s)) == {0, 2}


def test_maxent_endpoints_are_point_masses():
    lo = build_maxent_delay(200, 0.0, 1000)
    assert lo.pmf[0] == 1.0 and lo.pmf[1:].sum() == 0.0
    top = max_tau_star(200, 1000)
    hi = build_maxent_delay(200, top, 1000)
    assert hi.pmf[-1] == 1.0 and hi.pmf[:-1].sum() == 0.0


def test_maxent_interior_case():
    spec = build_maxent_delay(200, 100.0, 1000)
    assert abs(spec.constraint_residual) < 1e-9
    assert np.all(spec.pmf > 0)
    assert abs(spec.pmf.sum() - 1) < 1e-12
    assert spec.reported_tau < 100.0
    # independent check of the moment by direct summation
    k = np.arange(201)
    assert abs(sum(spec.pmf * np.exp(k / 1000)) - 1.1) < 1e-9


def test_maxent_unattainable():
    with pytest.raises(UnattainableTauStar):
        build_maxent_delay(200, max_tau_star(200, 1000) * 1.01, 1000)
    with pytest.raises(UnattainableTauStar):
        build_maxent_delay(200, -1.0, 1000)


@pytest.mark.parametrize("ts", np.linspace(1.0, 220.0, 12))
def test_maxent_tau_below_tau_star(ts):
    spec = build_maxent_delay(200, float(ts), 1000)
    assert spec.reported_tau <= ts
    assert tau_star_of(spec.pmf, 1000) == pytest.approx(ts, rel=1e-9)


def test_maxent_maximizes_entropy_under_perturbation():
    spec = build_maxent_delay(50, 20.0, 100)
    p = spec.pmf
    k = np.arange(51)
    A = np.vstack([np.ones(51), np.exp(k / 100)])
    # project random directions onto the null space of the two linear constraints
    _, _, vt = np.linalg.svd(A)
    null = vt[2:]
    gen = np.random.default_rng(0)
    h0 = entropy(p)
    for _ in range(100):
        d = gen.standard_normal(null.shape[0]) @ null
        step = 0.5 * p.min() / np.abs(d).max()
        q = p + step * d
        assert np.all(q >= 0)
        assert entropy(q) <= h0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.integers(5, 5000), st.floats(0.0, 1.0))
def test_maxent_residual_property(support_max, n, frac):
    ts = frac * max_tau_star(support_max, n)
    spec = build_maxent_delay(support_max, ts, n)
    assert abs(spec.constraint_residual) < 1e-9 * max(1.0, ts / n)
    assert abs(spec.pmf.sum() - 1) < 1e-12
