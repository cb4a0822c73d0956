import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdlab.noise import (QUOTED_BOUNDS, KINDS, ConfigurationError, MomentBounds, NoiseOracle,
                          verify_second_moment, verify_unbiasedness)
from sgdlab.objective import DomainError
from sgdlab.rng import probe_generator

ORACLES = [
    NoiseOracle("exact"),
    NoiseOracle("multiplicative", b=10.0),
    NoiseOracle("additive-gaussian", b=10.0, sigma=10.0),
    NoiseOracle("value-dependent", b=10.0, sigma=10.0, alpha_ref=0.05),
]


def test_exact_returns_gradient(f):
    o = NoiseOracle("exact")
    g = o.sample_gradient(3, -1.0, f.gradient(-1.0), 1.0, probe_generator(0))
    assert g[0] == -2.0


def test_bad_b_rejected():
    with pytest.raises(ConfigurationError):
        NoiseOracle("multiplicative", b=0.2)
    NoiseOracle("exact", b=0.0)  # the exact oracle ignores b


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        NoiseOracle("laplace")


def test_negative_gap(f, mult10):
    with pytest.raises(DomainError):
        mult10.sample_gradient(0, 1.0, f.gradient(1.0), -0.1, probe_generator(0))


def test_e1_support(f, mult10):
    lo, hi = mult10.e1_interval()
    assert (lo, hi) == pytest.approx((1 - math.sqrt(29), 1 + math.sqrt(29)))
    g = mult10.sample_gradient(0, -1.0, np.array([-2.0]), 1.0, probe_generator(1), size=50_000)
    e1 = g[:, 0] / -2.0
    assert e1.min() >= lo and e1.max() <= hi
    # uniform variance (3b - 1) / 3
    assert e1.var() == pytest.approx((3 * 10 - 1) / 3, rel=0.03)


def test_multiplicative_collinear(mult10):
    grad = np.array([0.3])
    g = mult10.sample_gradient(5, 0.0, grad, 0.0, probe_generator(2), size=1000)
    lo, hi = mult10.e1_interval()
    ratio = g[:, 0] / grad[0]
    assert np.all((ratio >= lo) & (ratio <= hi))
    zero = mult10.sample_gradient(5, 0.0, np.array([0.0]), 0.0, probe_generator(2), size=1000)
    assert np.all(zero == 0.0)


def test_reproducible(f):
    o = ORACLES[3]
    a = o.sample_gradient(7, 1.0, f.gradient(1.0), 2.0, probe_generator(11), size=64)
    b = o.sample_gradient(7, 1.0, f.gradient(1.0), 2.0, probe_generator(11), size=64)
    assert np.array_equal(a, b)


def test_amplitudes_decay():
    o = ORACLES[3]
    assert o.sigma_k(0) == 10.0
    assert o.sigma_k(1) == pytest.approx(10 / 2 ** 1.1)
    assert o.value_amplitude(0) == pytest.approx(math.sqrt(3) / 0.05)


@pytest.mark.parametrize("o, abc", [
    (ORACLES[0], (0.0, 1.0, 0.0)),
    (ORACLES[1], (0.0, 10 + 2 / 3, 0.0)),
    (ORACLES[2], (0.0, 10 + 2 / 3, 100.0)),
    (ORACLES[3], (1 / 0.05 ** 2, 10 + 2 / 3, 100.0)),
])
def test_derived_bounds_at_zero(o, abc):
    mb = o.moment_bounds(0)
    assert (mb.a, mb.b, mb.c) == pytest.approx(abc)


def test_derived_value_dependent_k1():
    mb = ORACLES[3].moment_bounds(1)
    assert mb.a == pytest.approx(1 / (0.05 ** 2 * 2 ** 2.2))
    assert mb.c == pytest.approx(100 / 2 ** 2.2)


def test_quoted_channel_bounds():
    assert ORACLES[1].moment_bounds(0, "paper").b == 10.0
    add = ORACLES[2].moment_bounds(3, "paper")
    assert (add.a, add.b, add.c) == pytest.approx((0.0, 20.0, 200 / 4 ** 2.2))
    vd = ORACLES[3].moment_bounds(0, "paper")
    assert vd.b == pytest.approx(30.0)
    assert vd.c == pytest.approx(300.0)


def test_quoted_a_dominates_derived():
    o = ORACLES[3]
    for k in (1, 2, 10, 100, 10_000):
        assert o.moment_bounds(k, "paper").a >= o.moment_bounds(k).a


def test_quoted_bounds_cover_kinds():
    assert set(QUOTED_BOUNDS) == set(KINDS)


def test_moment_bounds_validation():
    with pytest.raises(ValueError):
        MomentBounds(-1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        MomentBounds(0.0, math.inf, 0.0)
    assert MomentBounds(1.0, 2.0, 3.0).second_moment_bound(2.0, 4.0) == 13.0


@pytest.mark.parametrize("o", ORACLES, ids=lambda o: o.kind)
@pytest.mark.parametrize("x", [-0.5, 1.0, 2 * math.pi, 4 * math.pi + 1e-5, 17.0])
def test_validators_pass(f, o, x):
    rng = probe_generator(3)
    assert verify_unbiasedness(o, f, x, 10, 20_000, rng=rng).passed
    assert verify_second_moment(o, f, x, 10, 20_000, rng=rng).passed


def test_biased_oracle_detected(f):
    biased = NoiseOracle("multiplicative", b=10.0, bias=0.5)
    rep = verify_unbiasedness(biased, f, -0.5, 0, 100_000, rng=probe_generator(4))
    assert not rep.passed


def test_understated_bound_detected(f):
    # the quoted channel's b = 10 understates E[e1^2] = 10 + 2/3 at a pure-gradient state
    rep = verify_second_moment(ORACLES[1], f, -0.5, 0, 200_000, rng=probe_generator(5), channel="paper")
    assert not rep.passed


def test_validator_arguments(f, mult10):
    with pytest.raises(ValueError):
        verify_unbiasedness(mult10, f, 0.0, 0, 10)
    with pytest.raises(ValueError):
        verify_second_moment(mult10, f, 0.0, 0, 10_000, slack=-1.0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(ORACLES[1:]), st.floats(-3, 20), st.integers(0, 1000))
def test_draws_finite(o, x, k):
    from sgdlab.objective import make_piecewise
    f = make_piecewise()
    g = o.sample_gradient(k, x, f.gradient(x), f.evaluate(x) - f.f_min, probe_generator(k), size=256)
    assert np.all(np.isfinite(g))


def test_second_moment_validator_calibrated(f, mult10):
    # the bound is attained, so (empirical - bound) / se should be standard normal
    z = []
    for s in range(200):
        r = verify_second_moment(mult10, f, 2.424, 0, 20_000, rng=probe_generator(500 + s))
        z.append((r.statistic - r.target) / r.stderr)
    z = np.array(z)
    assert abs(z.mean()) < 0.3 and 0.8 < z.std() < 1.2
