"""Command-line front end.

Exit codes: 0 success, 1 assumption-check failure, 2 config parse error,
3 I/O error, 4 missing artifact.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from sgdlab.config import ConfigError, ExperimentConfig
from sgdlab.diagnostics import NoDataError, estimate_lojasiewicz_exponent, xi_probe
from sgdlab.engine import ScheduleRejected, TrajectoryRecord, run_trajectory
from sgdlab.experiments import run_table
from sgdlab.noise import QUOTED_BOUNDS
from sgdlab.plot import trajectory_svg
from sgdlab.rng import probe_generator
from sgdlab.schedules import DEFAULT_K_MAX

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO, EXIT_MISSING = range(5)


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def _load_config(path) -> ExperimentConfig:
    try:
        return ExperimentConfig.read(path)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}", EXIT_CONFIG) from None
    except ConfigError as exc:
        raise CliError(f"{path}: {exc}", EXIT_CONFIG) from None


def _out_dir(args, cfg=None) -> Path:
    out = Path(args.out or (cfg.run.out if cfg is not None else "out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"cannot write to output directory {out}: {exc}", EXIT_IO) from None
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _header(cfg: ExperimentConfig, **extra) -> dict:
    return {"tool": "sgdlab", "config": cfg.to_dict(), "master_seed": cfg.run.seed, **extra}


# -- check -------------------------------------------------------------------


def check_report(cfg: ExperimentConfig, k_max: int = DEFAULT_K_MAX) -> dict:
    """Condition verdicts on both bound channels for every configured level."""
    levels = []
    for level in cfg.run.levels:
        entry = {"level": level, "channels": {}}
        for channel in ("derived", "paper"):
            f, o, s = cfg.build(level, channel)
            results = s.check_all(k_max)
            entry["channels"][channel] = {
                "conditions": {r.condition: {"verdict": r.verdict, "value": r.value, **r.detail}
                               for r in results},
                "bounds_k0": dict(zip("abc", (float(v) for v in s.bounds(0)))),
                "all_pass": all(r.passed for r in results),
            }
        entry["alpha"] = float(s.stepsize(0))
        entry["quoted"] = QUOTED_BOUNDS[cfg.oracle.kind]
        levels.append(entry)
    return {"levels": levels, "k_max": k_max}


def cmd_check(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    report = check_report(cfg, args.k_max)
    channel = args.channel or cfg.schedule.channel
    for entry in report["levels"]:
        print(f"level {entry['level']:g}  alpha = {entry['alpha']:.6g}  quoted bound: {entry['quoted']}")
        for ch, res in entry["channels"].items():
            b = res["bounds_k0"]
            print(f"  [{ch}] (a_0, b_0, c_0) = ({b['a']:.6g}, {b['b']:.6g}, {b['c']:.6g})")
            for name, r in res["conditions"].items():
                print(f"    {name:<15} {r['verdict']:<7} value = {r['value']:.12g}")
    ok = all(e["channels"][channel]["all_pass"] for e in report["levels"])
    report.update(_header(cfg), channel=channel, all_pass=ok)
    _write(out / "check.json", json.dumps(report, indent=2, sort_keys=True, default=float))
    print(f"verdict on the {channel} channel: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


# -- run / plot --------------------------------------------------------------


def run_id(cfg: ExperimentConfig, x0: float, level: float, seed: int) -> str:
    raw = f"{cfg.oracle.kind}_x{x0:.6g}_l{level:g}_s{seed}"
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", raw)


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    x0 = cfg.run.x0[0] if args.x0 is None else args.x0
    level = cfg.run.levels[0] if args.level is None else args.level
    seed = cfg.run.seed if args.seed is None else args.seed
    if args.k_max is not None:
        cfg.run.k_max = args.k_max
    if not args.force:
        sub = ExperimentConfig.from_dict(cfg.to_dict())
        sub.run.levels = [level]
        rep = check_report(sub, min(cfg.run.k_max, DEFAULT_K_MAX))
        if not rep["levels"][0]["channels"]["derived"]["all_pass"]:
            print("assumption check failed on the derived channel; rerun with --force to proceed",
                  file=sys.stderr)
            return EXIT_CHECK
    f, o, s = cfg.build(level)
    try:
        rec = run_trajectory(cfg.run_config(x0, seed), f, o, s, force=args.force)
    except ScheduleRejected as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK
    rid = run_id(cfg, x0, level, seed)
    header = _header(cfg, run_id=rid, seed=seed, x0=x0, level=level)
    try:
        rec.write_csv(out / f"{rid}.csv", header)
        rec.write_json(out / f"{rid}.json", header)
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    if not args.no_plot:
        _write(out / f"{rid}.svg", trajectory_svg(f, rec, metadata=header))
    print(rid)
    print(f"final x = {rec.final_x[0]:.12g}  F = {rec.final_f:.12g}  |grad| = {rec.final_grad_norm:.3g}"
          f"  numeric_failure = {rec.numeric_failure}")
    return EXIT_OK


def _load_run(out: Path, rid: str):
    csv_path, json_path = out / f"{rid}.csv", out / f"{rid}.json"
    if not (csv_path.exists() and json_path.exists()):
        raise CliError(f"run {rid!r} not found in {out}", EXIT_MISSING)
    doc = json.loads(json_path.read_text())
    cfg = ExperimentConfig.from_dict(doc["config"])
    return TrajectoryRecord.read(csv_path, json_path), cfg, doc


def cmd_plot(args) -> int:
    out = Path(args.out or "out")
    rec, cfg, doc = _load_run(out, args.run)
    f, _, _ = cfg.build(doc["level"])
    header = {k: v for k, v in doc.items() if k != "record"}
    _write(out / f"{args.run}.svg", trajectory_svg(f, rec, metadata=header))
    print(out / f"{args.run}.svg")
    return EXIT_OK


# -- xi ----------------------------------------------------------------------


def parse_probe_spec(spec: str, rec: TrajectoryRecord) -> list:
    """``"a:b"`` (inclusive range of stored k), ``"a:b:step"``, or ``"k1,k2,..."``."""
    if ":" in spec:
        parts = [int(p) for p in spec.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        wanted = set(range(lo, hi + 1, step))
    else:
        wanted = {int(p) for p in spec.split(",") if p.strip()}
    ks = [int(k) for k in rec.k if int(k) in wanted]
    if not ks:
        raise CliError(f"no stored iterations match probe spec {spec!r}", EXIT_MISSING)
    return ks


def cmd_xi(args) -> int:
    out = Path(args.out or "out")
    rec, cfg, doc = _load_run(out, args.run)
    if args.config:
        cfg = _load_config(args.config)
    f, o, s = cfg.build(doc["level"], args.channel)
    ks = parse_probe_spec(args.probe, rec)
    rng = probe_generator(args.probe_seed)
    report = xi_probe(rec, ks, f, o, s, n_draws=args.n_draws or cfg.run.n_draws, rng=rng)
    gamma = cfg.run.gamma
    print(f"{'k':>8} {'F(x_k)':>14} {'E_k[F+ - Fmin]':>16} {'lhs':>12} {'rhs_unit':>12} {'gamma_req':>10}")
    for r in report.results:
        flag = " void" if r.event_void else ""
        print(f"{r.k:>8} {r.f_k:>14.8g} {r.e_cond:>16.8g} {r.lhs:>12.4g} {r.rhs_unit:>12.4g} "
              f"{r.gamma_required:>10.4g}{flag}")
    print(f"F_inf = {report.f_inf:.12g} (terminal spread {report.f_inf_spread:.3g})")
    print(f"max gamma_required over non-void probes: {report.gamma_max:.6g}  (configured gamma {gamma})")
    if report.above_limit_violations:
        print(f"above-limit violation: F(x_k) < F_inf at k = {report.above_limit_violations[:10]}")
    if report.void_ks:
        print(f"event void (F_inf >= F(x_k)) at {len(report.void_ks)} probe(s)")
    print(f"verdict: {report.verdict}")
    print(report.caveat)
    doc_out = _header(cfg, run_id=args.run, level=doc["level"], gamma=gamma, **report.to_dict())
    _write(out / f"{args.run}.xi.json", json.dumps(doc_out, indent=2, sort_keys=True, default=_finite))
    return EXIT_OK


def _finite(v):
    return float(v)


# -- kl ----------------------------------------------------------------------


def cmd_kl(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    f, _, _ = cfg.build()
    try:
        comp = f.component(args.component)
    except (KeyError, IndexError):
        names = [c.name for c in f.critical_catalog]
        raise CliError(f"unknown component {args.component!r}; catalog: {names}", EXIT_MISSING) from None
    rng = np.random.default_rng(args.seed)
    try:
        fit = estimate_lojasiewicz_exponent(f, comp, args.radius, args.n_samples, rng, center=args.center)
    except NoDataError as exc:
        print(f"no data: {exc}", file=sys.stderr)
        return EXIT_CHECK
    print(f"component {comp.name} ({comp.label}, F* = {comp.value:.6g})")
    print(f"theta_hat = {fit.theta:.4f}  R^2 = {fit.r2:.6f}  samples = {fit.n}")
    header = _header(cfg, component=comp.name, theta=fit.theta, r2=fit.r2, n=fit.n, radius=args.radius)
    lines = ["# " + json.dumps(header, sort_keys=True), "x,side,gap,grad_norm"]
    lines += [",".join(repr(float(v)) for v in row) for row in fit.samples]
    _write(out / f"kl_{comp.name}.csv", "\n".join(lines) + "\n")
    _write(out / f"kl_{comp.name}.json", json.dumps(header, indent=2, sort_keys=True))
    return EXIT_OK


# -- table -------------------------------------------------------------------


def cmd_table(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, cfg)
    if args.k_max is not None:
        cfg.run.k_max = args.k_max
    if args.seeds is not None:
        cfg.run.n_seeds = args.seeds

    def progress(row):
        print(f"  x0 = {row.x0:.6g}, level = {row.level:g}: {row.majority}", file=sys.stderr)

    table = run_table(cfg, workers=args.workers, progress=progress)
    text = table.format()
    print(text)
    stem = args.name or f"table_{cfg.oracle.kind}"
    _write(out / f"{stem}.txt", text + "\n")
    try:
        table.write_csv(out / f"{stem}.csv")
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgdlab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="TOML experiment config")
        sp.add_argument("--out", help="output directory (default: [run] out)")

    sp = sub.add_parser("check", help="verify the step/moment conditions")
    common(sp)
    sp.add_argument("--channel", choices=("derived", "paper"), help="channel deciding the exit code")
    sp.add_argument("--k-max", type=int, default=DEFAULT_K_MAX)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("run", help="one trajectory: CSV + JSON + SVG")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--x0", type=float)
    sp.add_argument("--level", type=float)
    sp.add_argument("--k-max", type=int)
    sp.add_argument("--force", action="store_true", help="run even if the assumption check fails")
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("table", help="outcome table over x0 x level")
    common(sp)
    sp.add_argument("--seeds", type=int)
    sp.add_argument("--k-max", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--name", help="output file stem")
    sp.set_defaults(func=cmd_table)

    sp = sub.add_parser("xi", help="probe the descent event along a stored run")
    common(sp, config_required=False)
    sp.add_argument("--run", required=True, help="run id printed by `run`")
    sp.add_argument("--probe", default="0:50", help="'a:b[:step]' or 'k1,k2,...'")
    sp.add_argument("--channel", choices=("derived", "paper"))
    sp.add_argument("--n-draws", type=int)
    sp.add_argument("--probe-seed", type=int, default=0)
    sp.set_defaults(func=cmd_xi)

    sp = sub.add_parser("kl", help="Lojasiewicz exponent near a critical component")
    common(sp)
    sp.add_argument("--component", required=True, help="catalog index, name or label")
    sp.add_argument("--radius", type=float, default=0.3)
    sp.add_argument("--n-samples", type=int, default=2000)
    sp.add_argument("--center", type=float, help="sample around this point instead")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_kl)

    sp = sub.add_parser("plot", help="re-render the SVG of a stored run")
    common(sp, config_required=False)
    sp.add_argument("--run", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
