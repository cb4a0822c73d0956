import math

import numpy as np
import pytest

from sgdlab.engine import (WORKERS_ENV, RunConfig, ScheduleRejected, TrajectoryRecord, default_workers,
                           run_ensemble, run_trajectory)
from sgdlab.noise import NoiseOracle
from sgdlab.objective import make_quadratic
from sgdlab.schedules import StepSchedule

BETA = 2.0


def sched(o, alpha=0.05):
    return StepSchedule.constant(alpha, o, BETA)


def test_exact_descent(f):
    o = NoiseOracle("exact")
    rec = run_trajectory(RunConfig(1.0, k_max=3000, record_stride=1), f, o, sched(o))
    assert np.all(np.diff(rec.f_values) <= 1e-15)
    assert rec.final_x[0] == pytest.approx(math.pi, abs=1e-6)
    assert rec.first_k_below_target > 0


def test_exact_matches_hand_loop(f):
    o = NoiseOracle("exact")
    rec = run_trajectory(RunConfig(-0.5, k_max=50, record_stride=1), f, o, sched(o))
    x = -0.5
    for _ in range(50):
        x -= 0.05 * f.gradient(x)[0]
    assert rec.final_x[0] == x


def test_plateau_frozen(f, mult10):
    rec = run_trajectory(RunConfig(2 * math.pi, k_max=500), f, mult10, sched(mult10))
    assert np.all(rec.x[:, 0] == 2 * math.pi)
    assert rec.min_grad_norm == 0.0 and rec.first_k_below_target == 0


def test_multiplicative_stays_left_of_saddle(f, mult10):
    rec = run_trajectory(RunConfig(-0.5, k_max=200_000), f, mult10, sched(mult10))
    # the contraction x <- x (1 - 2 alpha e1) can underflow to exactly 0, never past it
    assert np.all(rec.x[:, 0] <= 0)
    assert abs(rec.final_x[0]) < 1e-3


def test_deterministic(f):
    o = NoiseOracle("value-dependent", b=10, sigma=10, alpha_ref=0.05)
    cfg = RunConfig(1.0, k_max=100_000, seed=42)
    a = run_trajectory(cfg, f, o, sched(o))
    b = run_trajectory(cfg, f, o, sched(o))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.k, b.k)
    c = run_trajectory(RunConfig(1.0, k_max=100_000, seed=43), f, o, sched(o))
    assert not np.array_equal(a.x, c.x)


def test_prefix_consistent(f):
    # counter-based streams: a shorter run is a prefix of a longer one
    o = NoiseOracle("additive-gaussian", b=10, sigma=10)
    short = run_trajectory(RunConfig(-0.5, k_max=70_000, record_stride=1, dense_until=0), f, o, sched(o))
    long = run_trajectory(RunConfig(-0.5, k_max=140_000, record_stride=1, dense_until=0), f, o, sched(o))
    assert np.array_equal(short.x, long.x[: len(short.x)])


def test_workers_invariant(f):
    o = NoiseOracle("additive-gaussian", b=10, sigma=100)
    cfg = RunConfig(1.0, k_max=20_000, seed=5)
    one = run_ensemble(cfg, f, o, sched(o), 6, workers=1)
    many = run_ensemble(cfg, f, o, sched(o), 6, workers=4)
    assert [r.seed for r in one] == list(range(5, 11))
    for a, b in zip(one, many):
        assert np.array_equal(a.x, b.x)


def test_default_workers(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert default_workers() == 3
    monkeypatch.delenv(WORKERS_ENV)
    assert default_workers() >= 1


def test_record_layout(f, mult10):
    rec = run_trajectory(RunConfig(1.0, k_max=25_000, record_stride=100, dense_until=1000,
                                   terminal_window=500), f, mult10, sched(mult10))
    assert rec.k[0] == 0 and rec.final_k == 25_000
    assert np.all(np.diff(rec.k) > 0)
    assert np.array_equal(rec.k[:1001], np.arange(1001))
    assert np.array_equal(rec.k[rec.window()], np.arange(24_501, 25_001))


def test_csv_json_roundtrip(tmp_path, f, mult10):
    rec = run_trajectory(RunConfig(-0.5, k_max=5000, seed=9), f, mult10, sched(mult10))
    header = {"config": {"x": 1}, "master_seed": 9}
    rec.write_csv(tmp_path / "r.csv", header)
    rec.write_json(tmp_path / "r.json", header)
    back = TrajectoryRecord.read(tmp_path / "r.csv", tmp_path / "r.json")
    assert np.array_equal(back.x, rec.x) and np.array_equal(back.k, rec.k)
    assert back.config == rec.config and back.min_f == rec.min_f
    assert (tmp_path / "r.csv").read_text().startswith("# ")
    assert '"master_seed": 9' in (tmp_path / "r.json").read_text()


def test_gate_refuses(f):
    o = NoiseOracle("multiplicative", b=10)
    bad = StepSchedule.constant(0.5, o, BETA)
    with pytest.raises(ScheduleRejected):
        run_trajectory(RunConfig(1.0, k_max=10), f, o, bad)
    with pytest.raises(ScheduleRejected):
        run_ensemble(RunConfig(1.0, k_max=10), f, o, bad, 2)


def test_numeric_failure_truncates():
    q = make_quadratic()
    o = NoiseOracle("exact")
    # x <- x (1 - 2 alpha) with alpha = 10: |x| grows by 19 per step and overflows
    rec = run_trajectory(RunConfig(1.0, k_max=10_000), q, o, StepSchedule.constant(10.0, o, BETA), force=True)
    assert rec.numeric_failure and rec.failure_k is not None
    assert np.all(np.isfinite(rec.x))
    assert rec.final_k == rec.failure_k and rec.final_k < 10_000


def test_early_stop(f):
    o = NoiseOracle("exact")
    rec = run_trajectory(RunConfig(1.0, k_max=1_000_000, stop_grad_tol=1e-10, stop_window=10), f, o, sched(o))
    assert rec.stopped_early and rec.stop_k < 1_000_000


@pytest.mark.parametrize("kw", [{"k_max": 0}, {"record_stride": 0}, {"seed": -1}])
def test_run_config_validation(kw):
    with pytest.raises(ValueError):
        RunConfig(0.0, **kw)


def test_multidimensional():
    q = make_quadratic(3)
    o = NoiseOracle("additive-gaussian", b=2, sigma=1)
    rec = run_trajectory(RunConfig([1.0, -2.0, 0.5], k_max=50_000), q, o, StepSchedule.constant(0.05, o, BETA, dim=3))
    assert rec.x.shape[1] == 3
    assert np.linalg.norm(rec.final_x) < 1e-3
