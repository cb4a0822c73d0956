"""Step-size schedules and mechanical checks of the step/moment conditions.

Sequences are indexed from ``k = 0``.  Each of ``alpha_k, a_k, b_k, c_k`` is
either a :class:`PowerLaw` ``coef / (k + 1) ** power`` (which admits analytic
tails and limits) or an arbitrary vectorized callable of ``k`` (for which the
summability verdict can only be ``"unknown"``).

Three conditions are checked:

* summability: ``sum_k alpha_k (sqrt(a_k) + sqrt(c_k)) < inf``
* positive infimum: ``inf_k alpha_k (1 - alpha_k b_k beta / 2) > 0``
* monotone ratio:
  ``0 < sqrt(b_{k+1}/b_k) (2 - alpha_k b_k beta) / (2 - alpha_{k+1} b_{k+1} beta)
  * (1 + alpha_{k+1}^2 a_{k+1} beta / 2) <= 1``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

DEFAULT_K_MAX = 1_000_000


@dataclass(frozen=True)
class PowerLaw:
    """The sequence ``coef / (k + 1) ** power``; ``power = 0`` is a constant."""

    coef: float
    power: float = 0.0

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if self.power == 0.0:
            return np.full_like(k, self.coef, dtype=float) if k.ndim else float(self.coef)
        out = self.coef / (k + 1.0) ** self.power
        return out if k.ndim else float(out)

    def sqrt(self) -> "PowerLaw":
        return PowerLaw(math.sqrt(self.coef), self.power / 2)

    def __mul__(self, other: "PowerLaw") -> "PowerLaw":
        return PowerLaw(self.coef * other.coef, self.power + other.power)

    def limit(self) -> float:
        if self.coef == 0.0 or self.power > 0:
            return 0.0
        if self.power < 0:
            return math.inf
        return self.coef

    def tail_sum_bound(self, k_max: int) -> float:
        """Upper bound on ``sum_{k > k_max} coef / (k + 1) ** power``.

        Integral comparison; infinite when ``power <= 1`` and ``coef > 0``.
        """
        if self.coef == 0.0:
            return 0.0
        if self.power <= 1.0:
            return math.inf
        p = self.power
        return self.coef * (k_max + 1.0) ** (1.0 - p) / (p - 1.0)


Sequence_ = Union[PowerLaw, Callable]


@dataclass(frozen=True)
class BoundSequences:
    """Moment-bound sequences ``(a_k, b_k, c_k)`` under one interpretation."""

    a: Sequence_
    b: Sequence_
    c: Sequence_
    channel: str = "custom"
    note: str = ""

    def at(self, k):
        return _eval(self.a, k), _eval(self.b, k), _eval(self.c, k)


def _eval(seq, k):
    return seq(k) if isinstance(seq, PowerLaw) else np.asarray(seq(np.asarray(k)), dtype=float)


@dataclass(frozen=True)
class CheckResult:
    condition: str
    passed: Optional[bool]
    value: float
    detail: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if self.passed is None:
            return "unknown"
        return "pass" if self.passed else "fail"


class UndefinedRatioError(ValueError):
    pass


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes plus the moment-bound sequences they are checked against.

    ``bounds_source`` is either a noise oracle (anything with
    ``sequences(channel, dim)``) or a :class:`BoundSequences`.
    """

    alpha: Sequence_
    bounds_source: object
    beta: float
    channel: str = "derived"
    dim: int = 1

    @classmethod
    def constant(cls, alpha: float, bounds_source, beta: float, channel: str = "derived", dim: int = 1):
        if not alpha > 0:
            raise ValueError("step size must be positive")
        return cls(PowerLaw(alpha), bounds_source, beta, channel, dim)

    @classmethod
    def from_noise_level(cls, b: float, bounds_source, beta: float, channel: str = "derived", dim: int = 1):
        """Constant step with ``alpha * b = 1 / beta``."""
        return cls.constant(1.0 / (b * beta), bounds_source, beta, channel, dim)

    def with_channel(self, channel: str) -> "StepSchedule":
        return StepSchedule(self.alpha, self.bounds_source, self.beta, channel, self.dim)

    @property
    def sequences(self) -> BoundSequences:
        if isinstance(self.bounds_source, BoundSequences):
            return self.bounds_source
        return self.bounds_source.sequences(self.channel, self.dim)

    def stepsize(self, k):
        if np.any(np.asarray(k) < 0):
            raise ValueError("k must be non-negative")
        return _eval(self.alpha, k)

    def bounds(self, k):
        return self.sequences.at(k)

    # -- condition checks ------------------------------------------------

    def check_summability(self, k_max: int = DEFAULT_K_MAX) -> CheckResult:
        """Truncated sum of ``alpha_k (sqrt a_k + sqrt c_k)`` plus an analytic tail."""
        if k_max < 1:
            raise ValueError("k_max must be at least 1")
        seqs = self.sequences
        ks = np.arange(k_max + 1)
        alpha = _eval(self.alpha, ks)
        a, _, c = seqs.at(ks)
        if np.any(np.asarray(a) < 0) or np.any(np.asarray(c) < 0):
            raise ValueError("moment-bound sequences must be non-negative")
        terms = alpha * (np.sqrt(a) + np.sqrt(c))
        partial = float(np.sum(terms))

        laws = [self.alpha, seqs.a, seqs.c]
        if not all(isinstance(s, PowerLaw) for s in laws):
            return CheckResult("summability", None, partial,
                               {"partial_sum": partial, "k_max": k_max, "tail_bound": None,
                                "reason": "no closed form for the tail"})
        tail = (self.alpha * seqs.a.sqrt()).tail_sum_bound(k_max) + \
            (self.alpha * seqs.c.sqrt()).tail_sum_bound(k_max)
        total = partial + tail
        return CheckResult("summability", math.isfinite(total), total,
                           {"partial_sum": partial, "tail_bound": tail, "k_max": k_max})

    def check_inf_condition(self, k_max: int = DEFAULT_K_MAX) -> CheckResult:
        """``min_{k <= k_max} alpha_k (1 - alpha_k b_k beta / 2)``; pass iff > 0."""
        if k_max < 1:
            raise ValueError("k_max must be at least 1")
        ks = np.arange(k_max + 1)
        alpha = _eval(self.alpha, ks)
        _, b, _ = self.sequences.at(ks)
        vals = alpha * (1.0 - alpha * b * self.beta / 2.0)
        i = int(np.argmin(vals))
        detail = {"argmin_k": i, "k_max": k_max}
        seq_b = self.sequences.b
        limit = None
        if isinstance(self.alpha, PowerLaw) and isinstance(seq_b, PowerLaw):
            al, bl = self.alpha.limit(), seq_b.limit()
            limit = al * (1.0 - al * bl * self.beta / 2.0) if math.isfinite(al * bl) else -math.inf
            detail["limit"] = limit
        value = float(vals[i])
        passed = value > 0 and (limit is None or limit > 0)
        return CheckResult("inf_condition", passed, value, detail)

    def monotone_ratios(self, k_max: int = DEFAULT_K_MAX) -> np.ndarray:
        """The product for ``k = 0 .. k_max - 1``."""
        ks = np.arange(k_max + 1)
        alpha = np.broadcast_to(_eval(self.alpha, ks), ks.shape)
        a, b, _ = (np.broadcast_to(v, ks.shape) for v in self.sequences.at(ks))
        if np.any(b <= 0):
            k0 = int(np.argmax(b <= 0))
            raise UndefinedRatioError(
                f"b_k = 0 at k = {k0}: the ratio is undefined; use a positive floor for b_k")
        q = 2.0 - alpha * b * self.beta
        if np.any(q == 0):
            k0 = int(np.argmax(q == 0))
            raise UndefinedRatioError(
                f"alpha_k b_k beta = 2 at k = {k0}: the ratio has a zero denominator")
        return (np.sqrt(b[1:] / b[:-1]) * q[:-1] / q[1:]
                * (1.0 + alpha[1:] ** 2 * a[1:] * self.beta / 2.0))

    def check_monotone_ratio(self, k_max: int = DEFAULT_K_MAX) -> CheckResult:
        """Worst ratio over ``k < k_max``; pass iff every ratio lies in (0, 1]."""
        if k_max < 1:
            raise ValueError("k_max must be at least 1")
        r = self.monotone_ratios(k_max)
        worst = int(np.argmax(r))
        lowest = int(np.argmin(r))
        passed = bool(r[lowest] > 0 and r[worst] <= 1.0)
        detail = {"argmax_k": worst, "min_ratio": float(r[lowest]), "argmin_k": lowest, "k_max": k_max}
        if not passed:
            bad = np.flatnonzero((r <= 0) | (r > 1.0))
            detail["first_violation_k"] = int(bad[0])
        return CheckResult("monotone_ratio", passed, float(r[worst]), detail)

    def check_all(self, k_max: int = DEFAULT_K_MAX) -> list:
        out = [self.check_summability(k_max), self.check_inf_condition(k_max)]
        try:
            out.append(self.check_monotone_ratio(k_max))
        except UndefinedRatioError as exc:
            out.append(CheckResult("monotone_ratio", False, math.nan, {"error": str(exc)}))
        return out
