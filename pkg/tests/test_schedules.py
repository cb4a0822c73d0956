import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdlab.noise import NoiseOracle
from sgdlab.schedules import BoundSequences, PowerLaw, StepSchedule, UndefinedRatioError

BETA = 2.0


def seqs(a, b, c):
    return BoundSequences(a, b, c, "derived")


def test_noise_level_step():
    assert StepSchedule.from_noise_level(10, NoiseOracle("multiplicative", b=10), BETA).stepsize(0) == 0.05
    assert StepSchedule.from_noise_level(1000, NoiseOracle("multiplicative", b=1000), BETA).stepsize(7) == 5e-4


def test_power_law():
    p = PowerLaw(3.0, 2.0)
    assert p(1) == pytest.approx(0.75)
    assert p.sqrt()(3) == pytest.approx(math.sqrt(3) / 4)
    assert p.limit() == 0.0 and PowerLaw(2.0).limit() == 2.0
    assert PowerLaw(1.0, 2.0).tail_sum_bound(10) == pytest.approx(1 / 11, rel=0.1)
    assert PowerLaw(1.0, 1.0).tail_sum_bound(10) == math.inf
    assert PowerLaw(0.0).tail_sum_bound(10) == 0.0


def test_summability_decaying():
    o = NoiseOracle("additive-gaussian", b=10, sigma=10)
    r = StepSchedule.constant(0.05, o, BETA).check_summability(100_000)
    assert r.passed and math.isfinite(r.value)


def test_summability_constant_c_fails():
    s = StepSchedule.constant(0.05, seqs(PowerLaw(0.0), PowerLaw(10.0), PowerLaw(1.0)), BETA)
    assert s.check_summability(1000).passed is False


def test_summability_callable_unknown():
    s = StepSchedule.constant(0.05, seqs(lambda k: 0.0 * np.asarray(k, float), PowerLaw(10.0),
                                         lambda k: 1.0 / (np.asarray(k, float) + 1) ** 3), BETA)
    r = s.check_summability(1000)
    assert r.passed is None and r.verdict == "unknown"


def test_inf_condition_value():
    s = StepSchedule.constant(0.05, NoiseOracle("multiplicative", b=10), BETA, channel="paper")
    r = s.check_inf_condition(1000)
    assert r.passed and r.value == pytest.approx(0.025)


def test_inf_condition_boundary_fails():
    # alpha b beta = 2 exactly
    s = StepSchedule.constant(0.1, seqs(PowerLaw(0.0), PowerLaw(10.0), PowerLaw(0.0)), BETA)
    r = s.check_inf_condition(10)
    assert not r.passed and r.value == 0.0


def test_monotone_ratio_exactly_one():
    s = StepSchedule.constant(0.05, NoiseOracle("multiplicative", b=10), BETA)
    r = s.monotone_ratios(10_000)
    assert np.max(np.abs(r - 1.0)) <= 1e-12
    assert s.check_monotone_ratio(10_000).passed


def test_constant_a_fails_ratio():
    s = StepSchedule.constant(0.05, seqs(PowerLaw(1.0), PowerLaw(10.0), PowerLaw(0.0)), BETA)
    r = s.check_monotone_ratio(100)
    assert not r.passed and r.value > 1.0


def test_zero_b_undefined():
    s = StepSchedule.constant(0.05, seqs(PowerLaw(0.0), PowerLaw(0.0), PowerLaw(0.0)), BETA)
    with pytest.raises(UndefinedRatioError):
        s.monotone_ratios(10)
    assert s.check_all(10)[2].passed is False


def test_zero_denominator_undefined():
    s = StepSchedule.constant(0.05, NoiseOracle("additive-gaussian", b=10, sigma=10), BETA, channel="paper")
    with pytest.raises(UndefinedRatioError):
        s.monotone_ratios(10)


def test_value_dependent_quoted_channel_fails_at_k0_only():
    o = NoiseOracle("value-dependent", b=10, sigma=10, alpha_ref=0.05)
    s = StepSchedule.constant(0.05, o, BETA, channel="paper")
    alpha, (a, b, c) = 0.05, s.bounds(0)
    assert alpha * b * BETA == pytest.approx(3.0)
    inf = s.check_inf_condition(1000)
    assert not inf.passed and inf.detail["argmin_k"] == 0
    assert all(alpha * s.bounds(k)[1] * BETA < 2 for k in range(1, 1000))


def test_value_dependent_derived_channel_ratio():
    # constant b with a_k > 0: every factor exceeds 1 by alpha^2 a_k beta / 2
    o = NoiseOracle("value-dependent", b=10, sigma=10, alpha_ref=0.05)
    s = StepSchedule.constant(0.05, o, BETA)
    r = s.monotone_ratios(1000)
    assert np.all(r > 1.0)
    assert s.check_summability(1000).passed and s.check_inf_condition(1000).passed


@settings(max_examples=50, deadline=None)
@given(st.floats(1 / 3, 1e4), st.floats(0.05, 1.9))
def test_noise_level_rule_passes(b, frac):
    o = NoiseOracle("multiplicative", b=b)
    bb = o.moment_bounds(0).b
    alpha = frac / (bb * BETA)
    s = StepSchedule.constant(alpha, o, BETA)
    assert all(r.passed for r in s.check_all(200))
