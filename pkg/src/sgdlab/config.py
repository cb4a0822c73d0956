"""TOML experiment configs: one ``[objective]``, ``[oracle]``, ``[schedule]`` and ``[run]`` table.

Example::

    [objective]
    name = "piecewise"

    [oracle]
    kind = "multiplicative"
    b = 10.0
    sigma = 0.0
    eps_exp = 0.1

    [schedule]
    rule = "noise-level"     # alpha = 1 / (b * beta); or "constant" with alpha = ...
    channel = "derived"

    [run]
    x0 = [-0.5, 1.0, 12.566380614359172]
    levels = [10.0, 1000.0]  # b for multiplicative noise, sigma otherwise
    n_seeds = 100
    k_max = 1000000
    seed = 0

Unknown keys are rejected.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from sgdlab.engine import RunConfig
from sgdlab.noise import KINDS, NoiseOracle
from sgdlab.objective import OBJECTIVES, get_objective
from sgdlab.schedules import StepSchedule

EPS_NEAR_MAX = 1e-5


class ConfigError(ValueError):
    pass


@dataclass
class ObjectiveCfg:
    name: str = "piecewise"


@dataclass
class OracleCfg:
    kind: str = "multiplicative"
    b: float = 10.0
    sigma: float = 0.0
    eps_exp: float = 0.1
    # defaults to the schedule's step size
    alpha_ref: Optional[float] = None


@dataclass
class ScheduleCfg:
    rule: str = "noise-level"
    alpha: Optional[float] = None
    channel: str = "derived"


@dataclass
class RunCfg:
    x0: list = field(default_factory=lambda: [-0.5])
    levels: list = field(default_factory=lambda: [10.0])
    n_seeds: int = 100
    k_max: int = 1_000_000
    seed: int = 0
    record_stride: int = 100
    stop_grad_tol: float = 0.0
    stop_window: int = 1000
    gamma: float = 0.9
    n_draws: int = 100_000
    out: str = "out"


SECTIONS = {"objective": ObjectiveCfg, "oracle": OracleCfg, "schedule": ScheduleCfg, "run": RunCfg}


@dataclass
class ExperimentConfig:
    objective: ObjectiveCfg = field(default_factory=ObjectiveCfg)
    oracle: OracleCfg = field(default_factory=OracleCfg)
    schedule: ScheduleCfg = field(default_factory=ScheduleCfg)
    run: RunCfg = field(default_factory=RunCfg)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            out[name] = {k: v for k, v in asdict(getattr(self, name)).items() if v is not None}
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def write(self, path) -> None:
        Path(path).write_text(self.to_toml())

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown section(s) {sorted(unknown)}; expected {list(SECTIONS)}")
        parts = {}
        for name, typ in SECTIONS.items():
            block = doc.get(name, {})
            if not isinstance(block, dict):
                raise ConfigError(f"[{name}] must be a table")
            allowed = {f.name: f for f in fields(typ)}
            bad = set(block) - set(allowed)
            if bad:
                raise ConfigError(f"unknown key(s) {sorted(bad)} in [{name}]; allowed: {sorted(allowed)}")
            kwargs = {}
            for key, val in block.items():
                kwargs[key] = _coerce(name, key, val, typ.__dataclass_fields__[key])
            parts[name] = typ(**kwargs)
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            doc = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"TOML syntax error: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def read(cls, path) -> "ExperimentConfig":
        return cls.from_toml(Path(path).read_text())

    def validate(self) -> None:
        if self.objective.name not in OBJECTIVES:
            raise ConfigError(f"[objective] name: unknown objective {self.objective.name!r}")
        if self.oracle.kind not in KINDS:
            raise ConfigError(f"[oracle] kind: expected one of {KINDS}, got {self.oracle.kind!r}")
        if self.schedule.rule not in ("noise-level", "constant"):
            raise ConfigError("[schedule] rule: expected 'noise-level' or 'constant'")
        if self.schedule.rule == "constant" and not (self.schedule.alpha and self.schedule.alpha > 0):
            raise ConfigError("[schedule] alpha: a positive step is required with rule = 'constant'")
        if self.schedule.channel not in ("derived", "paper"):
            raise ConfigError("[schedule] channel: expected 'derived' or 'paper'")
        r = self.run
        if not r.x0:
            raise ConfigError("[run] x0: at least one starting point is required")
        if not r.levels:
            raise ConfigError("[run] levels: at least one noise level is required")
        for key in ("n_seeds", "k_max", "record_stride", "stop_window", "n_draws"):
            if getattr(r, key) < 1:
                raise ConfigError(f"[run] {key}: must be positive")
        if not 0 <= r.seed < 2**64:
            raise ConfigError("[run] seed: must be an unsigned 64-bit integer")

    # -- materialization -------------------------------------------------

    def build(self, level: Optional[float] = None, channel: Optional[str] = None):
        """``(objective, oracle, schedule)`` for one noise level."""
        level = self.run.levels[0] if level is None else float(level)
        f = get_objective(self.objective.name)
        oc = self.oracle
        b = level if oc.kind == "multiplicative" else oc.b
        sigma = level if oc.kind in ("additive-gaussian", "value-dependent") else oc.sigma
        if self.schedule.rule == "noise-level":
            alpha = 1.0 / (b * f.beta)
        else:
            alpha = float(self.schedule.alpha)
        o = NoiseOracle(oc.kind, b=b, sigma=sigma, eps_exp=oc.eps_exp,
                        alpha_ref=oc.alpha_ref or alpha, beta_ref=f.beta)
        s = StepSchedule.constant(alpha, o, f.beta, channel or self.schedule.channel, f.dim)
        return f, o, s

    def run_config(self, x0: float, seed: Optional[int] = None) -> RunConfig:
        r = self.run
        return RunConfig(x0=x0, k_max=r.k_max, seed=r.seed if seed is None else seed,
                         record_stride=r.record_stride, stop_grad_tol=r.stop_grad_tol,
                         stop_window=r.stop_window)


def _coerce(section, key, val, f):
    want = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    where = f"[{section}] {key}"
    if "list" in want:
        if not isinstance(val, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                for v in val):
            raise ConfigError(f"{where}: expected a list of numbers, got {val!r}")
        return [float(v) for v in val]
    if "float" in want:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {val!r}")
        if not math.isfinite(val):
            raise ConfigError(f"{where}: must be finite")
        return float(val)
    if "int" in want:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{where}: expected an integer, got {val!r}")
        return val
    if not isinstance(val, str):
        raise ConfigError(f"{where}: expected a string, got {val!r}")
    return val


# -- the three experiment families ------------------------------------------

X0_GRID = [-0.5, 1.0, 4 * math.pi + EPS_NEAR_MAX]


def multiplicative_experiment(**run) -> ExperimentConfig:
    """Strong-growth noise ``g = e1 F'(x)``, ``b`` in {10, 1000}, ``alpha b = 1/beta``."""
    return ExperimentConfig(
        oracle=OracleCfg(kind="multiplicative", b=10.0),
        schedule=ScheduleCfg(rule="noise-level"),
        run=RunCfg(x0=list(X0_GRID), levels=[10.0, 1000.0], **run),
    )


def additive_experiment(**run) -> ExperimentConfig:
    """Multiplicative plus decaying Gaussian noise, ``b = 10``, sigma in {10, 100}."""
    return ExperimentConfig(
        oracle=OracleCfg(kind="additive-gaussian", b=10.0, sigma=10.0),
        schedule=ScheduleCfg(rule="constant", alpha=0.05),
        run=RunCfg(x0=list(X0_GRID), levels=[10.0, 100.0], **run),
    )


def value_dependent_experiment(**run) -> ExperimentConfig:
    """Adds a term proportional to ``sqrt(F(x) - F_min)``; sigma in {10, 100}."""
    return ExperimentConfig(
        oracle=OracleCfg(kind="value-dependent", b=10.0, sigma=10.0),
        schedule=ScheduleCfg(rule="constant", alpha=0.05),
        run=RunCfg(x0=list(X0_GRID), levels=[10.0, 100.0], **run),
    )


def exact_experiment(**run) -> ExperimentConfig:
    return ExperimentConfig(
        oracle=OracleCfg(kind="exact"),
        schedule=ScheduleCfg(rule="constant", alpha=0.05),
        run=RunCfg(x0=list(X0_GRID), levels=[0.0], **run),
    )


PRESETS = {
    "multiplicative": multiplicative_experiment,
    "additive": additive_experiment,
    "value-dependent": value_dependent_experiment,
    "exact": exact_experiment,
}
