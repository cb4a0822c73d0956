"""Stochastic gradient oracles and the moment bounds they satisfy.

Four families, in increasing noise complexity::

    exact             g = grad
    multiplicative    g = e1 * grad
    additive-gaussian g = e1 * grad + e2
    value-dependent   g = e3 * sqrt(F(x) - F_min) + e1 * grad + e2

with, at iteration k,

    e1 ~ U[1 - r, 1 + r],           r = sqrt(3b - 1)
    e2 ~ N(0, sigma_k^2 I),         sigma_k = sigma / (k+1)^(1+eps)
    e3 ~ U[-w_k, w_k] (per coord),  w_k = sqrt(3) / (alpha (k+1)^(1+eps))

All draws are independent with ``E[e1] = 1`` and ``E[e2] = E[e3] = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numba
import numpy as np

from sgdlab.objective import DomainError, ObjectiveSpec
from sgdlab.rng import raw_words, to_normal, to_unit
from sgdlab.schedules import BoundSequences, PowerLaw

KINDS = ("exact", "multiplicative", "additive-gaussian", "value-dependent")
EXACT, MULTIPLICATIVE, ADDITIVE, VALUE = range(4)

# Bounds quoted for each noise family (the ``paper`` channel), shown next to the derived ones.
QUOTED_BOUNDS = {
    "exact": "E[g^2] = F'(x)^2",
    "multiplicative": "E[g^2] <= b F'(x)^2",
    "additive-gaussian": "E[g^2] <= 2b F'(x)^2 + 2 sigma^2 / (k+1)^(2+2eps)",
    "value-dependent": "E[g^2] <= 8/(alpha^2 beta) (F(x)-F_min)^2 + 4b F'(x)^2 + 4 sigma^2 / (k+1)^(2+2eps)",
}


class ConfigurationError(ValueError):
    """Oracle or schedule parameters that make the sampling law undefined."""


@dataclass(frozen=True)
class MomentBounds:
    a: float
    b: float
    c: float

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"moment bound {name} = {v} must be finite and non-negative")

    def second_moment_bound(self, f_gap: float, grad_sq: float) -> float:
        return self.a * f_gap + self.b * grad_sq + self.c


@dataclass(frozen=True)
class NoiseOracle:
    """Stochastic gradient generator for one of the four noise families.

    Parameters
    ----------
    kind : str
        One of ``KINDS``.
    b : float
        Multiplicative level; ``e1`` has variance ``(3b - 1) / 3``.  Must be
        at least 1/3.  Ignored by the exact oracle.
    sigma : float
        Additive scale at ``k = 0``.
    eps_exp : float
        Decay exponent of the additive and value-dependent amplitudes.
    alpha_ref : float
        Step size entering the value-dependent amplitude ``w_k``.
    beta_ref : float
        Smoothness constant used by the ``paper`` bound channel.
    bias : float
        Shift added to ``e1``.  Zero for every shipped oracle; a non-zero
        value produces a deliberately biased oracle for validator tests.
    """

    kind: str = "exact"
    b: float = 10.0
    sigma: float = 0.0
    eps_exp: float = 0.1
    alpha_ref: float = 0.05
    beta_ref: float = 2.0
    bias: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown oracle kind {self.kind!r}; choose from {KINDS}")
        if self.kind != "exact" and not self.b >= 1.0 / 3.0:
            raise ConfigurationError(f"b = {self.b} < 1/3 gives a negative radicand in sqrt(3b - 1)")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be non-negative")
        if not self.eps_exp > 0:
            raise ConfigurationError("eps_exp must be positive")
        if not self.alpha_ref > 0 or not self.beta_ref > 0:
            raise ConfigurationError("alpha_ref and beta_ref must be positive")

    @property
    def code(self) -> int:
        return KINDS.index(self.kind)

    @property
    def half_width(self) -> float:
        """Half-width ``sqrt(3b - 1)`` of the multiplicative factor's support."""
        return 0.0 if self.kind == "exact" else math.sqrt(3.0 * self.b - 1.0)

    def e1_interval(self) -> tuple:
        r = self.half_width
        return (1.0 - r + self.bias, 1.0 + r + self.bias)

    def sigma_k(self, k):
        return self.sigma / (np.asarray(k, dtype=float) + 1.0) ** (1.0 + self.eps_exp)

    def value_amplitude(self, k):
        """Half-width ``w_k`` of the value-dependent factor's support."""
        return math.sqrt(3.0) / (self.alpha_ref * (np.asarray(k, dtype=float) + 1.0) ** (1.0 + self.eps_exp))

    @staticmethod
    def words_per_draw(dim: int) -> int:
        return 1 + 3 * dim

    def params(self) -> np.ndarray:
        return np.array([self.half_width, self.sigma, self.eps_exp, self.alpha_ref, self.bias])

    # -- bounds ----------------------------------------------------------

    def sequences(self, channel: str = "derived", dim: int = 1) -> BoundSequences:
        """Moment-bound sequences under the ``derived`` or ``paper`` reading.

        ``derived`` are the tight bounds implied by the sampling law.
        ``paper`` are the sequences the experiment descriptions quote; for
        the value-dependent family the ``k`` in ``a_k`` is shifted to ``k+1``.
        """
        eps = self.eps_exp
        zero = PowerLaw(0.0)
        b2 = 1.0 + (3.0 * self.b - 1.0) / 3.0  # E[e1^2] for the unbiased law
        if self.bias:
            b2 = (1.0 + self.bias) ** 2 + (3.0 * self.b - 1.0) / 3.0
        c_law = PowerLaw(dim * self.sigma ** 2, 2 + 2 * eps)
        if channel == "derived":
            if self.kind == "exact":
                return BoundSequences(zero, PowerLaw(1.0), zero, "derived")
            if self.kind == "multiplicative":
                return BoundSequences(zero, PowerLaw(b2), zero, "derived")
            if self.kind == "additive-gaussian":
                return BoundSequences(zero, PowerLaw(b2), c_law, "derived")
            a_law = PowerLaw(dim / self.alpha_ref ** 2, 2 + 2 * eps)
            return BoundSequences(a_law, PowerLaw(b2), c_law, "derived")
        if channel == "paper":
            s2 = self.sigma ** 2
            if self.kind == "exact":
                return BoundSequences(zero, PowerLaw(1.0), zero, "paper")
            if self.kind == "multiplicative":
                return BoundSequences(zero, PowerLaw(self.b), zero, "paper", QUOTED_BOUNDS[self.kind])
            if self.kind == "additive-gaussian":
                return BoundSequences(zero, PowerLaw(2 * self.b), PowerLaw(2 * s2, 2 + 2 * eps),
                                      "paper", QUOTED_BOUNDS[self.kind])
            return BoundSequences(
                PowerLaw(2.0 / (self.alpha_ref ** 2 * self.beta_ref), 2 + eps),
                PowerLaw(3.0 * self.b, 2.0),
                PowerLaw(3.0 * s2, 2 + 2 * eps),
                "paper",
                QUOTED_BOUNDS[self.kind],
            )
        raise ValueError(f"unknown bound channel {channel!r}")

    def moment_bounds(self, k: int, channel: str = "derived", dim: int = 1) -> MomentBounds:
        a, b, c = self.sequences(channel, dim).at(k)
        return MomentBounds(float(a), float(b), float(c))

    # -- sampling --------------------------------------------------------

    def sample_gradient(self, k: int, x, grad_true, f_gap: float, rng, size: Optional[int] = None):
        """Draw ``g_k`` at state ``x`` (``size`` independent draws if given).

        ``rng`` is a numpy Generator or BitGenerator; raw 64-bit words are
        consumed from it, ``words_per_draw(dim)`` rounded up to whole Philox
        blocks per draw.  ``x`` is unused except through ``grad_true`` and
        ``f_gap``: the caller supplies both.
        """
        if f_gap < 0:
            raise DomainError(f"f_gap = {f_gap} must be non-negative")
        grad = np.ascontiguousarray(np.asarray(grad_true, dtype=float).reshape(-1))
        n = 1 if size is None else int(size)
        words = raw_words(rng, n, self.words_per_draw(grad.shape[0]))
        out = np.empty((n, grad.shape[0]))
        _draw_batch(self.code, k, grad, float(f_gap), words, self.params(), out)
        return out[0] if size is None else out


@numba.njit(cache=True, nogil=True)
def draw_into(kind, k, grad, gap, words, params, out):
    """Write one draw of ``g_k`` into ``out``.

    ``words`` layout: [e1][e3 x dim][e2 x 2 dim].  ``params`` is
    ``NoiseOracle.params()``.
    """
    n = grad.shape[0]
    if kind == 0:
        for i in range(n):
            out[i] = grad[i]
        return
    half_width, sigma, eps, alpha_ref, bias = params[0], params[1], params[2], params[3], params[4]
    e1 = 1.0 - half_width + 2.0 * half_width * to_unit(words[0]) + bias
    for i in range(n):
        out[i] = e1 * grad[i]
    if kind >= 2:
        sk = sigma / (k + 1.0) ** (1.0 + eps)
        for i in range(n):
            out[i] += sk * to_normal(words[1 + n + 2 * i], words[2 + n + 2 * i])
    if kind == 3:
        w = math.sqrt(3.0) / (alpha_ref * (k + 1.0) ** (1.0 + eps))
        r = math.sqrt(gap)
        for i in range(n):
            out[i] += (2.0 * to_unit(words[1 + i]) - 1.0) * w * r


@numba.njit(cache=True)
def _draw_batch(kind, k, grad, gap, words, params, out):
    for j in range(out.shape[0]):
        draw_into(kind, k, grad, gap, words[j], params, out[j])


# -- validators ----------------------------------------------------------


@dataclass(frozen=True)
class MomentTestReport:
    name: str
    passed: bool
    statistic: float
    target: float
    stderr: float
    n_draws: int
    detail: dict


def _z(confidence: float) -> float:
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def _state(f: ObjectiveSpec, x):
    grad = f.gradient(x)
    gap = f.evaluate(x) - f.f_min
    return grad, max(gap, 0.0)


def verify_unbiasedness(o: NoiseOracle, f: ObjectiveSpec, x, k: int, n_draws: int = 100_000,
                        confidence: float = 0.9973, rng=None) -> MomentTestReport:
    """Is the true gradient inside the confidence interval of the sample mean?"""
    if n_draws < 1000:
        raise ValueError("n_draws must be at least 1000")
    rng = np.random.default_rng(0) if rng is None else rng
    grad, gap = _state(f, x)
    g = o.sample_gradient(k, x, grad, gap, rng, size=n_draws)
    degenerate = bool(np.all(g == g[0]))
    mean = g[0].copy() if degenerate else g.mean(axis=0)
    se = np.zeros_like(mean) if degenerate else g.std(axis=0, ddof=1) / math.sqrt(n_draws)
    half = _z(confidence) * se
    dev = np.abs(mean - grad)
    if np.all(se == 0):
        passed = bool(np.allclose(mean, grad, rtol=1e-12, atol=1e-300))
    else:
        passed = bool(np.all(dev <= half))
    worst = int(np.argmax(dev - half))
    return MomentTestReport(
        "unbiasedness", passed, float(mean[worst]), float(grad[worst]), float(se[worst]), n_draws,
        {"half_width": float(half[worst]), "confidence": confidence, "degenerate": degenerate},
    )


def verify_second_moment(o: NoiseOracle, f: ObjectiveSpec, x, k: int, n_draws: int = 100_000,
                         slack: Optional[float] = None, rng=None, channel: str = "derived",
                         ) -> MomentTestReport:
    """Empirical ``E||g||^2`` against ``a_k gap + b_k ||grad||^2 + c_k + slack``.

    ``slack`` defaults to three standard errors of the empirical mean.
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be at least 1000")
    if slack is not None and slack < 0:
        raise ValueError("slack must be non-negative")
    rng = np.random.default_rng(0) if rng is None else rng
    grad, gap = _state(f, x)
    g = o.sample_gradient(k, x, grad, gap, rng, size=n_draws)
    sq = np.einsum("ij,ij->i", g, g)
    degenerate = bool(np.all(sq == sq[0]))
    emp = float(sq[0]) if degenerate else float(sq.mean())
    se = 0.0 if degenerate else float(sq.std(ddof=1) / math.sqrt(n_draws))
    mb = o.moment_bounds(k, channel, f.dim)
    bound = mb.second_moment_bound(gap, float(grad @ grad))
    tol = 3.0 * se if slack is None else slack
    # floating error of the bound itself
    tol += 1e-12 * max(1.0, abs(bound))
    return MomentTestReport(
        "second_moment", emp <= bound + tol, emp, bound, se, n_draws,
        {"slack": tol, "a": mb.a, "b": mb.b, "c": mb.c, "channel": channel},
    )
