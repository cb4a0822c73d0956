"""Smooth coercive objectives with exact gradients and a declared critical set.

An objective carries two numba-compiled kernels operating on 1D float arrays
of length ``dim``:

* ``value_fn(x) -> float``
* ``grad_fn(x, out) -> None`` writing the gradient into ``out``

so the SGD engine can call them inside its compiled loop without allocating.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

LABELS = ("saddle", "local-max", "local-min", "global-min")

PI = math.pi


class DomainError(ValueError):
    """Input outside the domain where an operation is defined."""


@dataclass(frozen=True)
class CriticalComponent:
    """A connected piece of the critical set: the box ``[lo, hi]``.

    ``lo == hi`` gives an isolated critical point.
    """

    lo: tuple
    hi: tuple
    label: str
    value: float
    name: str = ""

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("empty region: lo > hi")

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        excess = np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)
        return float(np.linalg.norm(excess))

    def contains(self, x) -> bool:
        return self.distance(x) == 0.0


@dataclass(frozen=True)
class SmoothnessReport:
    lipschitz_ratio: float
    fd_error: float
    beta: float
    fd_tol: float
    n_pairs: int

    @property
    def passed(self) -> bool:
        return self.lipschitz_ratio <= self.beta * (1 + 1e-9) + 1e-12 and self.fd_error <= self.fd_tol


@dataclass(frozen=True)
class ObjectiveSpec:
    """A beta-smooth coercive objective plus its catalog of critical components.

    Immutable; safe to share between concurrent trajectory workers.
    """

    name: str
    dim: int
    beta: float
    f_min: float
    critical_catalog: tuple
    value_fn: Callable = field(repr=False)
    grad_fn: Callable = field(repr=False)
    breakpoints: tuple = ()
    # radius beyond which evaluate increases along rays from the origin
    coercive_radius: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def _point(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float).reshape(-1)
        if arr.shape[0] != self.dim:
            raise DomainError(f"expected a point of dimension {self.dim}, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"non-finite input {x!r}")
        return arr

    def evaluate(self, x) -> float:
        return float(self.value_fn(self._point(x)))

    def gradient(self, x) -> np.ndarray:
        arr = self._point(x)
        out = np.empty(self.dim)
        self.grad_fn(arr, out)
        return out

    def evaluate_many(self, xs) -> np.ndarray:
        """Values at each row of ``xs`` (shape ``(n, dim)`` or ``(n,)`` when dim is 1)."""
        xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, self.dim))
        return _map_value(self.value_fn, xs)

    def gradient_many(self, xs) -> np.ndarray:
        xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, self.dim))
        return _map_grad(self.grad_fn, xs)

    def grad_norm_many(self, xs) -> np.ndarray:
        return np.linalg.norm(self.gradient_many(xs), axis=1)

    def component(self, key) -> CriticalComponent:
        """Look a catalog entry up by index, name, or label."""
        if isinstance(key, (int, np.integer)):
            return self.critical_catalog[key]
        if isinstance(key, str) and key.isdigit():
            return self.critical_catalog[int(key)]
        for comp in self.critical_catalog:
            if key in (comp.name, comp.label):
                return comp
        raise KeyError(f"no critical component {key!r} in {self.name}")

    def classify_point(self, x, tol_dist: float = 1e-3) -> Optional[CriticalComponent]:
        """Nearest catalog component within ``tol_dist`` of ``x``, else None."""
        if not tol_dist > 0:
            raise ValueError("tol_dist must be positive")
        x = np.asarray(x, dtype=float).reshape(-1)
        best, best_d = None, math.inf
        for comp in self.critical_catalog:
            d = comp.distance(x)
            if d <= tol_dist and d < best_d:
                best, best_d = comp, d
        return best

    def check_smoothness(self, domain, n_samples: int = 10_000, rng_seed=0,
                         fd_step: float = 1e-6, fd_tol: float = 1e-4) -> SmoothnessReport:
        """Sampled Lipschitz ratio of the gradient and central-difference error.

        Pairs are drawn uniformly in the box ``domain = (lo, hi)``.
        """
        if n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), (self.dim,)) for v in domain)
        if np.any(hi <= lo):
            raise DomainError(f"empty domain {domain!r}")
        rng = np.random.default_rng(rng_seed)
        xs = rng.uniform(lo, hi, size=(n_samples, self.dim))
        ys = rng.uniform(lo, hi, size=(n_samples, self.dim))
        gx, gy = self.gradient_many(xs), self.gradient_many(ys)
        dist = np.linalg.norm(xs - ys, axis=1)
        ok = dist > 0
        ratio = np.linalg.norm(gx - gy, axis=1)[ok] / dist[ok]

        fd = np.empty_like(xs)
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = fd_step
            fd[:, j] = (self.evaluate_many(xs + e) - self.evaluate_many(xs - e)) / (2 * fd_step)
        fd_err = np.max(np.abs(fd - gx))
        return SmoothnessReport(
            lipschitz_ratio=float(ratio.max(initial=0.0)),
            fd_error=float(fd_err),
            beta=self.beta,
            fd_tol=fd_tol,
            n_pairs=int(ok.sum()),
        )


@numba.njit(cache=True)
def _map_value(value_fn, xs):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = value_fn(xs[i])
    return out


@numba.njit(cache=True)
def _map_grad(grad_fn, xs):
    out = np.empty_like(xs)
    for i in range(xs.shape[0]):
        grad_fn(xs[i], out[i])
    return out


# -- the piecewise test function -------------------------------------------
#
# Breakpoints 0, pi, 3pi, 4pi, 5pi; at each one the right-hand branch is used.
# Values and first derivatives match on both sides, so the function is C^1
# with gradient Lipschitz constant 2 (attained on the quadratic branches).

@numba.njit(cache=True)
def _piecewise_value(x):
    t = x[0]
    if t < 0.0:
        return t * t + 1.0
    if t < PI:
        return math.cos(t)
    if t < 3.0 * PI:
        return -1.0
    if t < 4.0 * PI:
        return 0.5 * math.cos(t) - 0.5
    if t < 5.0 * PI:
        return math.cos(t) / 3.0 - 1.0 / 3.0
    d = t - 5.0 * PI
    return d * d - 2.0 / 3.0


@numba.njit(cache=True)
def _piecewise_grad(x, out):
    t = x[0]
    if t < 0.0:
        out[0] = 2.0 * t
    elif t < PI:
        out[0] = -math.sin(t)
    elif t < 3.0 * PI:
        out[0] = 0.0
    elif t < 4.0 * PI:
        out[0] = -0.5 * math.sin(t)
    elif t < 5.0 * PI:
        out[0] = -math.sin(t) / 3.0
    else:
        out[0] = 2.0 * (t - 5.0 * PI)


def make_piecewise() -> ObjectiveSpec:
    """The piecewise 1D test objective with its four critical components."""
    catalog = (
        CriticalComponent((0.0,), (0.0,), "saddle", 1.0, name="saddle"),
        CriticalComponent((PI,), (3 * PI,), "global-min", -1.0, name="plateau"),
        CriticalComponent((4 * PI,), (4 * PI,), "local-max", 0.0, name="max-4pi"),
        CriticalComponent((5 * PI,), (5 * PI,), "local-min", -2.0 / 3.0, name="min-5pi"),
    )
    return ObjectiveSpec(
        name="piecewise",
        dim=1,
        beta=2.0,
        f_min=-1.0,
        critical_catalog=catalog,
        value_fn=_piecewise_value,
        grad_fn=_piecewise_grad,
        breakpoints=(0.0, PI, 3 * PI, 4 * PI, 5 * PI),
        coercive_radius=5 * PI,
    )


@numba.njit(cache=True)
def _sq_value(x):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


@numba.njit(cache=True)
def _sq_grad(x, out):
    for i in range(x.shape[0]):
        out[i] = 2.0 * x[i]


def make_quadratic(dim: int = 1) -> ObjectiveSpec:
    """``||x||^2``: a single global minimizer at the origin, beta = 2."""
    zero = (0.0,) * dim
    return ObjectiveSpec(
        name="quadratic",
        dim=dim,
        beta=2.0,
        f_min=0.0,
        critical_catalog=(CriticalComponent(zero, zero, "global-min", 0.0, name="origin"),),
        value_fn=_sq_value,
        grad_fn=_sq_grad,
    )


@numba.njit(cache=True)
def _const_value(x):
    return 3.0


@numba.njit(cache=True)
def _const_grad(x, out):
    out[:] = 0.0


def make_constant() -> ObjectiveSpec:
    """Constant objective; every point is critical, so the catalog is left empty."""
    return ObjectiveSpec(
        name="constant",
        dim=1,
        beta=1.0,
        f_min=3.0,
        critical_catalog=(),
        value_fn=_const_value,
        grad_fn=_const_grad,
    )


OBJECTIVES = {
    "piecewise": make_piecewise,
    "quadratic": make_quadratic,
}


def get_objective(name: str) -> ObjectiveSpec:
    try:
        return OBJECTIVES[name]()
    except KeyError:
        raise KeyError(f"unknown objective {name!r}; choose from {sorted(OBJECTIVES)}") from None

