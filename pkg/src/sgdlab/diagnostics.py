"""Convergence diagnostics for recorded trajectories.

* limit classification against the objective's critical catalog;
* Monte-Carlo conditional expectations ``E_k[F(x_{k+1}) - F_min]`` at a
  fixed state, re-drawing from the oracle's k-th law;
* probes of the per-iteration descent event used by the almost-sure
  convergence theorem, and the conditional descent inequality;
* empirical Lojasiewicz exponents near a critical component.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from sgdlab.engine import TrajectoryRecord
from sgdlab.noise import NoiseOracle
from sgdlab.objective import CriticalComponent, ObjectiveSpec
from sgdlab.rng import probe_generator
from sgdlab.schedules import StepSchedule

MINIMIZER_LABELS = ("global-min", "local-min")

PROBE_CAVEAT = (
    "Monte-Carlo probes test the event only at the sampled iterations; "
    "they can refute it or be consistent with it, never certify it for all k."
)


@dataclass(frozen=True)
class LimitClassification:
    label: str
    distance: float
    above_limit_held: str
    component: Optional[str] = None
    window_diameter: float = 0.0
    sampled: bool = False


def classify_limit(rec: TrajectoryRecord, f: ObjectiveSpec, tol_dist: float = 1e-3,
                   tol_grad: float = 1e-4) -> LimitClassification:
    """Label the limit of a trajectory from its dense terminal window."""
    if len(rec.k) == 0:
        raise ValueError("empty trajectory record")
    if rec.numeric_failure:
        return LimitClassification("non-convergence", math.nan, "undefined")
    xs = rec.x[rec.window()]
    diameter = float(np.linalg.norm(np.ptp(xs, axis=0)))
    if diameter > tol_dist:
        return LimitClassification("non-convergence", math.nan, "undefined", window_diameter=diameter)

    above, sampled = _above_limit(rec)
    center = xs.mean(axis=0)
    comp = f.classify_point(center, tol_dist)
    if comp is None or np.linalg.norm(f.gradient(center)) >= tol_grad:
        return LimitClassification("none", math.nan, above, None, diameter, sampled)
    return LimitClassification(comp.label, comp.distance(center), above, comp.name, diameter, sampled)


def _above_limit(rec: TrajectoryRecord):
    """Does ``F(x_k) > F_inf`` hold along the run, with ``F_inf`` the final value?

    Uses the engine's exact running minimum when present, else the stored
    (possibly decimated) values.
    """
    f_inf = rec.final_f
    if rec.has_exact_stats:
        lowest, count, sampled = rec.min_f, rec.min_f_count, False
    else:
        fv = rec.f_values
        lowest = float(fv.min())
        count = int(np.sum(fv == lowest))
        sampled = rec.config.record_stride > 1 and rec.final_k > rec.config.dense_until
    if lowest < f_inf:
        return "no", sampled
    return ("yes-except-equality" if count > 1 else "yes"), sampled


# -- conditional expectations ------------------------------------------------


def _rng(rng):
    return probe_generator(0) if rng is None else rng


def estimate_conditional_value(x, k: int, f: ObjectiveSpec, o: NoiseOracle, s: StepSchedule,
                               n_draws: int = 100_000, rng=None):
    """Monte-Carlo ``E_k[F(x - alpha_k g) - F_min]`` at state ``x``.

    Returns ``(mean, standard_error)``.  A degenerate law (all draws equal)
    gives the exact value and zero error.
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be at least 1000")
    x = np.asarray(x, dtype=float).reshape(-1)
    grad = f.gradient(x)
    gap = max(f.evaluate(x) - f.f_min, 0.0)
    g = o.sample_gradient(k, x, grad, gap, _rng(rng), size=n_draws)
    vals = f.evaluate_many(x - float(s.stepsize(k)) * g) - f.f_min
    if np.all(vals == vals[0]):
        return float(vals[0]), 0.0
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_draws))


@dataclass(frozen=True)
class DescentReport:
    passed: bool
    margin: float
    stderr: float
    expected_next: float
    bound: float


def check_conditional_descent(x, k: int, f: ObjectiveSpec, o: NoiseOracle, s: StepSchedule,
                              n_draws: int = 100_000, rng=None) -> DescentReport:
    """``E_k[F(x+) - F_min] <= (1 + alpha^2 a beta/2) gap - alpha (1 - alpha b beta/2) |grad|^2
    + alpha^2 c beta / 2``, within three standard errors.

    ``margin`` is bound minus estimate (non-negative when the inequality holds).
    """
    e, se = estimate_conditional_value(x, k, f, o, s, n_draws, rng)
    x = np.asarray(x, dtype=float).reshape(-1)
    alpha = float(s.stepsize(k))
    a, b, c = (float(v) for v in s.bounds(k))
    beta = s.beta
    gap = f.evaluate(x) - f.f_min
    gsq = float(np.sum(f.gradient(x) ** 2))
    bound = ((1 + alpha ** 2 * a * beta / 2) * gap - alpha * (1 - alpha * b * beta / 2) * gsq
             + alpha ** 2 * c * beta / 2)
    margin = bound - e
    tol = 3 * se + 1e-12 * max(1.0, abs(bound))
    return DescentReport(margin >= -tol, margin, se, e, bound)


# -- descent-event probes ----------------------------------------------------


@dataclass(frozen=True)
class XiProbeResult:
    k: int
    x_k: tuple
    f_k: float
    e_cond: float
    e_cond_stderr: float
    lhs: float
    rhs_unit: float
    gamma_required: float
    event_void: bool
    above_limit_violated: bool


@dataclass
class XiProbeReport:
    results: list
    f_inf: float
    f_inf_spread: float
    channel: str
    gamma_max: float = math.nan
    void_ks: list = field(default_factory=list)
    violated_ks: list = field(default_factory=list)
    above_limit_violations: list = field(default_factory=list)
    caveat: str = PROBE_CAVEAT

    @property
    def verdict(self) -> str:
        if self.violated_ks:
            return f"violated at k = {self.violated_ks[:10]}"
        if not any(not r.event_void for r in self.results):
            return "event void at every probe"
        return "consistent with some gamma0 < 1"

    def to_dict(self) -> dict:
        return {
            "f_inf": self.f_inf,
            "f_inf_spread": self.f_inf_spread,
            "channel": self.channel,
            "gamma_max": self.gamma_max,
            "void_ks": self.void_ks,
            "violated_ks": self.violated_ks,
            "above_limit_violations": self.above_limit_violations,
            "verdict": self.verdict,
            "caveat": self.caveat,
            "probes": [r.__dict__ for r in self.results],
        }


def xi_probe(rec: TrajectoryRecord, probe_ks, f: ObjectiveSpec, o: NoiseOracle, s: StepSchedule,
             f_inf: Optional[float] = None, n_draws: int = 100_000, rng=None,
             channel: Optional[str] = None) -> XiProbeReport:
    """Evaluate the descent event at recorded iterations ``probe_ks``.

    At each probe::

        lhs       = |(F_inf - F_min) - 2/(2 + alpha^2 a beta) E_k[F(x_{k+1}) - F_min]
                     + alpha^2 c beta / 2|
        rhs_unit  = (1 - alpha b beta / 2) |grad F(x_k)|^2
        gamma_req = lhs / rhs_unit

    The event holds at level gamma iff ``F_inf < F(x_k)`` and
    ``gamma_req <= gamma``.  ``F_inf`` defaults to the run's final value.
    """
    if channel is not None:
        s = s.with_channel(channel)
    win = rec.window()
    spread = float(np.ptp(rec.f_values[win]))
    f_inf = rec.final_f if f_inf is None else float(f_inf)
    rng = _rng(rng)
    beta = s.beta
    results = []
    for k in probe_ks:
        i = rec.index_of(int(k))
        x = rec.x[i]
        fk = float(rec.f_values[i])
        e, se = estimate_conditional_value(x, int(k), f, o, s, n_draws, rng)
        alpha = float(s.stepsize(k))
        a, b, c = (float(v) for v in s.bounds(k))
        w = 2.0 / (2.0 + alpha ** 2 * a * beta)
        lhs = abs((f_inf - f.f_min) - w * e + alpha ** 2 * c * beta / 2)
        rhs = (1 - alpha * b * beta / 2) * float(np.sum(f.gradient(x) ** 2))
        if rhs > 0:
            gamma = lhs / rhs
        else:
            gamma = 0.0 if lhs <= 3 * w * se else math.inf
        results.append(XiProbeResult(
            k=int(k), x_k=tuple(float(v) for v in x), f_k=fk, e_cond=e, e_cond_stderr=se,
            lhs=lhs, rhs_unit=rhs, gamma_required=gamma,
            event_void=not (f_inf < fk), above_limit_violated=fk < f_inf,
        ))
    live = [r for r in results if not r.event_void]
    report = XiProbeReport(results, f_inf, spread, s.channel)
    report.gamma_max = max((r.gamma_required for r in live), default=math.nan)
    report.void_ks = [r.k for r in results if r.event_void]
    report.violated_ks = [r.k for r in live if not r.gamma_required < 1.0]
    report.above_limit_violations = [r.k for r in results if r.above_limit_violated]
    return report


# -- Lojasiewicz exponent ----------------------------------------------------


class NoDataError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentFit:
    theta: float
    r2: float
    n: int
    samples: np.ndarray  # columns: x..., side, |F - F*|, |grad F|


def estimate_lojasiewicz_exponent(f: ObjectiveSpec, component: CriticalComponent, radius: float = 0.3,
                                  n_samples: int = 2000, rng=None, decades: float = 3.0,
                                  center=None) -> ExponentFit:
    """Fit ``|grad F| ~ C (F - F*)^theta`` near a critical component.

    Distances to the component are log-uniform in ``[radius 10^-decades, radius]``.
    In 1D points are placed just outside each end of ``[lo, hi]``; each side
    gets its own constant ``C``.  For a local maximum the gap is ``F* - F``.
    ``center`` samples around an arbitrary point instead (one side label per
    direction), which inside a plateau yields no usable data.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    d = radius * 10.0 ** (-decades * rng.uniform(size=n_samples))
    if f.dim == 1:
        side = rng.integers(0, 2, size=n_samples)
        if center is None:
            lo, hi = component.lo[0], component.hi[0]
            xs = np.where(side == 0, lo - d, hi + d)
        else:
            c0 = float(np.ravel(center)[0])
            xs = np.where(side == 0, c0 - d, c0 + d)
        xs = xs[:, None]
    else:
        if center is None and not component.is_point:
            raise NotImplementedError("multi-dimensional box components need an explicit center")
        c0 = np.asarray(component.lo if center is None else center, dtype=float)
        u = rng.normal(size=(n_samples, f.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        xs = c0 + d[:, None] * u
        side = np.zeros(n_samples, dtype=int)

    gap = np.abs(f.evaluate_many(xs) - component.value)
    gn = f.grad_norm_many(xs)
    ok = (gap > 0) & (gn > 0)
    if not np.any(ok):
        raise NoDataError(
            "every sampled point has F equal to the component value; sample at the "
            "component boundary instead of inside a plateau")
    lg, lgn, sd = np.log(gap[ok]), np.log(gn[ok]), side[ok]
    sides = np.unique(sd)
    design = np.column_stack([lg] + [(sd == v).astype(float) for v in sides])
    coef, *_ = np.linalg.lstsq(design, lgn, rcond=None)
    resid = lgn - design @ coef
    ss_tot = float(np.sum((lgn - lgn.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    samples = np.column_stack([xs, side, gap, gn])
    return ExponentFit(float(coef[0]), r2, int(ok.sum()), samples)
