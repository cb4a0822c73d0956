"""Saddle escape under additive Gaussian noise: start at x0 = -1/2, sigma = 10.

Writes the trajectory (CSV + JSON) and an SVG with the start point in pink and
the end point in blue, over [-2, 20].

    python scripts/escape_figure.py [--seed 0] [--k-max 1000000] [--out out/figure]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from sgdlab.config import additive_experiment
from sgdlab.engine import run_trajectory
from sgdlab.plot import trajectory_svg


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-max", type=int, default=1_000_000)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--out", default="out/figure")
    args = p.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cfg = additive_experiment(k_max=args.k_max, seed=args.seed)
    cfg.run.x0 = [-0.5]
    cfg.run.levels = [args.sigma]
    f, o, s = cfg.build()
    rec = run_trajectory(cfg.run_config(-0.5), f, o, s)
    header = {"tool": "sgdlab", "config": cfg.to_dict(), "master_seed": args.seed}
    stem = out / f"escape_sigma{args.sigma:g}_s{args.seed}"
    rec.write_csv(stem.with_suffix(".csv"), header)
    rec.write_json(stem.with_suffix(".json"), header)
    stem.with_suffix(".svg").write_text(trajectory_svg(f, rec, metadata=header))
    crossed = int(rec.k[(rec.x[:, 0] > 0).argmax()]) if (rec.x[:, 0] > 0).any() else None
    print(f"final x = {rec.final_x[0]:.6f}, F = {rec.final_f:.6f}; first stored k with x > 0: {crossed}")
    print(stem.with_suffix(".svg"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
