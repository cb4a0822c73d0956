"""Outcome tables: ensembles per (x0, noise level) cell, classified and tallied."""
from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from sgdlab.config import ExperimentConfig
from sgdlab.diagnostics import classify_limit
from sgdlab.engine import TrajectoryRecord, run_ensemble

LABEL_ORDER = ("global-min", "local-min", "saddle", "local-max", "none", "non-convergence")
ABOVE_ORDER = ("yes", "yes-except-equality", "no", "undefined")


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    label: str
    above_limit: str
    final_x: float
    min_grad_norm: float
    first_k_below_target: int
    numeric_failure: bool


@dataclass
class OutcomeRow:
    x0: float
    level: float
    majority: str
    labels: dict
    above: dict
    n_seeds: int
    seeds: list = field(default_factory=list, compare=False, repr=False)

    def count(self, label: str) -> int:
        return self.labels.get(label, 0)


@dataclass
class OutcomeTable:
    rows: list
    meta: dict = field(default_factory=dict, compare=False)

    def row(self, x0: float, level: float) -> OutcomeRow:
        for r in self.rows:
            if np.isclose(r.x0, x0, rtol=0, atol=1e-12) and r.level == level:
                return r
        raise KeyError((x0, level))

    def format(self) -> str:
        head = f"{'x0':>12} | {'level':>8} | {'nature of x_inf (majority)':<26} | labels | F(x_k) > F_inf ?"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.x0:>12.6g} | {r.level:>8.6g} | {r.majority:<26} | "
                         f"{_hist_text(r.labels, LABEL_ORDER)} | {_hist_text(r.above, ABOVE_ORDER)}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self.meta, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(["x0", "level", "majority", "labels", "above_limit", "n_seeds"])
            for r in self.rows:
                w.writerow([repr(r.x0), repr(r.level), r.majority, _hist_text(r.labels, LABEL_ORDER),
                            _hist_text(r.above, ABOVE_ORDER), r.n_seeds])

    @classmethod
    def read_csv(cls, path) -> "OutcomeTable":
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            lines = fh.readlines()
        if lines and lines[0].startswith("#"):
            meta = json.loads(lines[0][1:])
            lines = lines[1:]
        for rec in csv.DictReader(lines):
            rows.append(OutcomeRow(float(rec["x0"]), float(rec["level"]), rec["majority"],
                                   _parse_hist(rec["labels"]), _parse_hist(rec["above_limit"]),
                                   int(rec["n_seeds"])))
        return cls(rows, meta)


def _hist_text(h: dict, order) -> str:
    keys = [k for k in order if h.get(k)] + sorted(k for k in h if k not in order and h[k])
    return ";".join(f"{k}:{h[k]}" for k in keys)


def _parse_hist(text: str) -> dict:
    if not text:
        return {}
    return {k: int(v) for k, v in (item.rsplit(":", 1) for item in text.split(";"))}


def majority_label(counts: Counter) -> str:
    top = max(counts.values())
    return next(k for k in LABEL_ORDER + tuple(sorted(counts)) if counts.get(k) == top)


def summarize(rec: TrajectoryRecord, f) -> SeedOutcome:
    c = classify_limit(rec, f)
    return SeedOutcome(rec.seed, c.label, c.above_limit_held, float(rec.final_x[0]),
                       rec.min_grad_norm, rec.first_k_below_target, rec.numeric_failure)


def run_cell(cfg: ExperimentConfig, x0: float, level: float, n_seeds: Optional[int] = None,
             workers: Optional[int] = None) -> OutcomeRow:
    f, o, s = cfg.build(level)
    n = cfg.run.n_seeds if n_seeds is None else n_seeds
    outcomes = run_ensemble(cfg.run_config(x0), f, o, s, n, workers=workers,
                            reduce=lambda rec: summarize(rec, f))
    labels = Counter(out.label for out in outcomes)
    above = Counter(out.above_limit for out in outcomes)
    return OutcomeRow(float(x0), float(level), majority_label(labels), dict(labels), dict(above), n,
                      seeds=outcomes)


def run_table(cfg: ExperimentConfig, n_seeds: Optional[int] = None, workers: Optional[int] = None,
              progress=None) -> OutcomeTable:
    """Every (x0, level) cell of the config, x0-major."""
    rows = []
    for x0 in cfg.run.x0:
        for level in cfg.run.levels:
            rows.append(run_cell(cfg, x0, level, n_seeds, workers))
            if progress is not None:
                progress(rows[-1])
    meta = {"config": cfg.to_dict(), "master_seed": cfg.run.seed,
            "n_seeds": cfg.run.n_seeds if n_seeds is None else n_seeds}
    return OutcomeTable(rows, meta)
