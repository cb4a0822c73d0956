"""SGD recursion ``x_{k+1} = x_k - alpha_k g_k`` for single seeds and ensembles.

The inner loop is a numba kernel consuming pre-generated counter-based words
in chunks.  Storage per trajectory:

* every iterate up to ``dense_until``, then every ``record_stride``-th;
* the last ``terminal_window`` iterates, always dense;
* exact running statistics over *all* iterates (minimum of F and how many
  iterates attain it, running minimum of the gradient norm, first k at which
  it drops below ``grad_target``).
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numba
import numpy as np

from sgdlab.noise import NoiseOracle, draw_into
from sgdlab.objective import DomainError, ObjectiveSpec
from sgdlab.rng import iteration_words
from sgdlab.schedules import DEFAULT_K_MAX, StepSchedule

WORKERS_ENV = "SGDLAB_WORKERS"
CHUNK = 1 << 16

OK, FAILED, STOPPED, NEGATIVE_GAP = 0, 1, 2, 3


class ScheduleRejected(ValueError):
    """The schedule fails the positive-infimum condition and no override was given."""


@dataclass(frozen=True)
class RunConfig:
    x0: tuple
    k_max: int = 1_000_000
    seed: int = 0
    record_stride: int = 100
    stop_grad_tol: float = 0.0
    stop_window: int = 1000
    dense_until: int = 10_000
    terminal_window: int = 1000
    grad_target: float = 1e-4
    trajectory: int = 0

    def __post_init__(self):
        x0 = self.x0
        if np.ndim(x0) == 0:
            x0 = (float(x0),)
        object.__setattr__(self, "x0", tuple(float(v) for v in np.ravel(x0)))
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.record_stride < 1 or self.stop_window < 1 or self.terminal_window < 1:
            raise ValueError("record_stride, stop_window and terminal_window must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x0"] = list(self.x0)
        return d


@dataclass
class TrajectoryRecord:
    seed: int
    config: RunConfig
    k: np.ndarray
    x: np.ndarray
    f_values: np.ndarray
    grad_norms: np.ndarray
    stopped_early: bool = False
    stop_k: Optional[int] = None
    numeric_failure: bool = False
    failure_k: Optional[int] = None
    min_f: float = math.nan
    min_f_count: int = 0
    min_grad_norm: float = math.nan
    first_k_below_target: int = -1
    meta: dict = field(default_factory=dict)

    @property
    def final_k(self) -> int:
        return int(self.k[-1])

    @property
    def final_x(self) -> np.ndarray:
        return self.x[-1]

    @property
    def final_f(self) -> float:
        return float(self.f_values[-1])

    @property
    def final_grad_norm(self) -> float:
        return float(self.grad_norms[-1])

    @property
    def has_exact_stats(self) -> bool:
        return self.min_f_count > 0

    def window(self, size: Optional[int] = None) -> slice:
        """Slice of the stored arrays covering the dense terminal window."""
        size = self.config.terminal_window if size is None else size
        start = np.searchsorted(self.k, self.final_k - size + 1)
        return slice(int(start), len(self.k))

    def index_of(self, k: int) -> int:
        i = int(np.searchsorted(self.k, k))
        if i >= len(self.k) or self.k[i] != k:
            raise KeyError(f"iteration {k} is not stored in this record")
        return i

    # -- serialization ---------------------------------------------------

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config.to_dict(),
            "final_k": self.final_k,
            "final_x": self.final_x.tolist(),
            "final_f": self.final_f,
            "final_grad_norm": self.final_grad_norm,
            "stopped_early": self.stopped_early,
            "stop_k": self.stop_k,
            "numeric_failure": self.numeric_failure,
            "failure_k": self.failure_k,
            "min_f": self.min_f,
            "min_f_count": self.min_f_count,
            "min_grad_norm": self.min_grad_norm,
            "first_k_below_target": self.first_k_below_target,
            "n_stored": len(self.k),
            "meta": self.meta,
        }

    def write_csv(self, path, header: Optional[dict] = None) -> None:
        dim = self.x.shape[1]
        xcols = ["x"] if dim == 1 else [f"x{i}" for i in range(dim)]
        with open(path, "w", newline="") as fh:
            if header is not None:
                fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(["k", *xcols, "f", "grad_norm"])
            for i in range(len(self.k)):
                w.writerow([int(self.k[i]), *(repr(float(v)) for v in self.x[i]),
                            repr(float(self.f_values[i])), repr(float(self.grad_norms[i]))])

    def write_json(self, path, header: Optional[dict] = None) -> None:
        doc = dict(header or {})
        doc["record"] = self.summary()
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default))

    @classmethod
    def read(cls, csv_path, json_path) -> "TrajectoryRecord":
        doc = json.loads(Path(json_path).read_text())
        s = doc["record"]
        rows = [r for r in _read_csv_rows(csv_path)]
        head, body = rows[0], rows[1:]
        arr = np.array(body, dtype=float) if body else np.empty((0, len(head)))
        cfg = RunConfig(**s["config"])
        return cls(
            seed=s["seed"],
            config=cfg,
            k=arr[:, 0].astype(np.int64),
            x=arr[:, 1:-2],
            f_values=arr[:, -2],
            grad_norms=arr[:, -1],
            stopped_early=s["stopped_early"],
            stop_k=s["stop_k"],
            numeric_failure=s["numeric_failure"],
            failure_k=s["failure_k"],
            min_f=s["min_f"],
            min_f_count=s["min_f_count"],
            min_grad_norm=s["min_grad_norm"],
            first_k_below_target=s["first_k_below_target"],
            meta=s.get("meta", {}),
        )


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _read_csv_rows(path):
    with open(path, newline="") as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            yield row


# -- kernel ----------------------------------------------------------------

# stats layout
S_MIN_F, S_MIN_F_COUNT, S_MIN_GN, S_FIRST_BELOW, S_GRAD_TARGET, S_STOP_TOL, S_STOP_W, S_RUN = range(8)


@numba.njit(nogil=True)
def _observe(stats, k, fx, gn):
    if fx < stats[S_MIN_F]:
        stats[S_MIN_F] = fx
        stats[S_MIN_F_COUNT] = 1.0
    elif fx == stats[S_MIN_F]:
        stats[S_MIN_F_COUNT] += 1.0
    if gn < stats[S_MIN_GN]:
        stats[S_MIN_GN] = gn
    if stats[S_FIRST_BELOW] < 0 and gn < stats[S_GRAD_TARGET]:
        stats[S_FIRST_BELOW] = k
    if gn < stats[S_STOP_TOL]:
        stats[S_RUN] += 1.0
    else:
        stats[S_RUN] = 0.0


@numba.njit(nogil=True)
def _advance(value_fn, grad_fn, kind, params, f_min, x, k0, n, words, alphas,
             rec_k, rec_x, pos, dense_until, stride, ring_k, ring_x, ring_pos, stats, grad, g):
    """Run steps ``k0 .. k0+n-1``.  Returns (status, k_reached)."""
    dim = x.shape[0]
    ring_n = ring_k.shape[0]
    for i in range(n):
        k = k0 + i
        fx = value_fn(x)
        grad_fn(x, grad)
        gn = 0.0
        for j in range(dim):
            gn += grad[j] * grad[j]
        gn = math.sqrt(gn)
        _observe(stats, k, fx, gn)
        if stats[S_STOP_TOL] > 0.0 and stats[S_RUN] >= stats[S_STOP_W]:
            return STOPPED, k
        gap = fx - f_min
        if gap < 0.0:
            return NEGATIVE_GAP, k
        draw_into(kind, k, grad, gap, words[i], params, g)
        finite = True
        for j in range(dim):
            x[j] = x[j] - alphas[i] * g[j]
            if not math.isfinite(x[j]):
                finite = False
        if not finite:
            return FAILED, k
        kn = k + 1
        if kn <= dense_until or kn % stride == 0:
            p = pos[0]
            rec_k[p] = kn
            for j in range(dim):
                rec_x[p, j] = x[j]
            pos[0] = p + 1
        r = ring_pos[0] % ring_n
        ring_k[r] = kn
        for j in range(dim):
            ring_x[r, j] = x[j]
        ring_pos[0] += 1
    return OK, k0 + n


@numba.njit(nogil=True)
def _observe_final(value_fn, grad_fn, x, k, stats, grad):
    fx = value_fn(x)
    grad_fn(x, grad)
    gn = 0.0
    for j in range(x.shape[0]):
        gn += grad[j] * grad[j]
    _observe(stats, k, fx, math.sqrt(gn))


# -- driver ----------------------------------------------------------------


def gate_schedule(s: StepSchedule, k_max: int, force: bool = False):
    """Refuse schedules whose positive-infimum check fails, unless forced."""
    if force:
        return None
    res = s.check_inf_condition(min(k_max, DEFAULT_K_MAX))
    if not res.passed:
        raise ScheduleRejected(
            f"inf_k alpha_k (1 - alpha_k b_k beta / 2) = {res.value:.6g} <= 0 "
            f"(k = {res.detail['argmin_k']}); pass force=True to run anyway")
    return res


def run_trajectory(cfg: RunConfig, f: ObjectiveSpec, o: NoiseOracle, s: StepSchedule,
                   force: bool = False) -> TrajectoryRecord:
    """One seeded SGD trajectory; bit-for-bit determined by its inputs."""
    gate_schedule(s, cfg.k_max, force)
    return _run(cfg, f, o, s)


def _run(cfg: RunConfig, f: ObjectiveSpec, o: NoiseOracle, s: StepSchedule) -> TrajectoryRecord:
    dim = f.dim
    x = np.array(cfg.x0, dtype=float)
    if x.shape[0] != dim:
        raise DomainError(f"x0 has dimension {x.shape[0]}, objective expects {dim}")
    if not np.all(np.isfinite(x)):
        raise DomainError("x0 must be finite")
    K = cfg.k_max
    stride = cfg.record_stride
    cap = min(K, cfg.dense_until) + K // stride + 2
    rec_k = np.empty(cap, dtype=np.int64)
    rec_x = np.empty((cap, dim))
    rec_k[0] = 0
    rec_x[0] = x
    pos = np.ones(1, dtype=np.int64)
    W = cfg.terminal_window
    ring_k = np.full(W, -1, dtype=np.int64)
    ring_x = np.empty((W, dim))
    ring_k[0] = 0
    ring_x[0] = x
    ring_pos = np.ones(1, dtype=np.int64)
    stats = np.array([np.inf, 0.0, np.inf, -1.0, cfg.grad_target,
                      cfg.stop_grad_tol, float(cfg.stop_window), 0.0])
    grad = np.empty(dim)
    g = np.empty(dim)
    params = o.params()
    wpd = o.words_per_draw(dim)

    k = 0
    status = OK
    while k < K:
        n = min(CHUNK, K - k)
        words = iteration_words(cfg.seed, cfg.trajectory, k, n, wpd)
        alphas = np.ascontiguousarray(np.broadcast_to(s.stepsize(np.arange(k, k + n)), (n,)), dtype=float)
        status, k = _advance(f.value_fn, f.grad_fn, o.code, params, f.f_min, x, k, n, words, alphas,
                             rec_k, rec_x, pos, cfg.dense_until, stride, ring_k, ring_x, ring_pos,
                             stats, grad, g)
        if status != OK:
            break
    if status == NEGATIVE_GAP:
        raise DomainError(f"F(x_k) < f_min at k = {k}: the objective's f_min is wrong")
    if status == OK:
        _observe_final(f.value_fn, f.grad_fn, x, k, stats, grad)

    # terminal iterate: k for OK/STOPPED, the last finite iterate k for FAILED
    ks = np.concatenate([rec_k[:pos[0]], ring_k[ring_k >= 0]])
    xs = np.concatenate([rec_x[:pos[0]], ring_x[ring_k >= 0]])
    ks, idx = np.unique(ks, return_index=True)
    xs = xs[idx]
    keep = ks <= k
    ks, xs = ks[keep], xs[keep]
    if status == OK and ks[-1] != k:
        ks = np.append(ks, k)
        xs = np.vstack([xs, x])
    return TrajectoryRecord(
        seed=cfg.seed,
        config=cfg,
        k=ks,
        x=xs,
        f_values=f.evaluate_many(xs),
        grad_norms=f.grad_norm_many(xs),
        stopped_early=status == STOPPED,
        stop_k=k if status == STOPPED else None,
        numeric_failure=status == FAILED,
        failure_k=k if status == FAILED else None,
        min_f=float(stats[S_MIN_F]),
        min_f_count=int(stats[S_MIN_F_COUNT]),
        min_grad_norm=float(stats[S_MIN_GN]),
        first_k_below_target=int(stats[S_FIRST_BELOW]),
        meta={"objective": f.name, "oracle": asdict(o)},
    )


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ensemble(cfg_template: RunConfig, f: ObjectiveSpec, o: NoiseOracle, s: StepSchedule,
                 n_seeds: int, workers: Optional[int] = None, force: bool = False,
                 reduce=None) -> list:
    """Trajectories for seeds ``cfg_template.seed + i``, in seed order.

    ``reduce`` maps each record to whatever the caller keeps (e.g. a
    classification), so large ensembles need not hold every record.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    gate_schedule(s, cfg_template.k_max, force)
    cfgs = [replace(cfg_template, seed=cfg_template.seed + i) for i in range(n_seeds)]

    def work(cfg):
        rec = _run(cfg, f, o, s)
        return rec if reduce is None else reduce(rec)

    workers = default_workers() if workers is None else workers
    if workers <= 1:
        return [work(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, cfgs))
