"""Regenerate the three outcome tables (multiplicative, additive, value-dependent noise).

    python scripts/reproduce_tables.py [--seeds 100] [--k-max 1000000] [--out out/tables]

Each table is printed and written as text + CSV; the CSV header carries the
full config and master seed.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from sgdlab.config import PRESETS


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--k-max", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default="out/tables")
    p.add_argument("--only", choices=("multiplicative", "additive", "value-dependent"))
    args = p.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    from sgdlab.experiments import run_table

    for name in ("multiplicative", "additive", "value-dependent"):
        if args.only and name != args.only:
            continue
        cfg = PRESETS[name](n_seeds=args.seeds, k_max=args.k_max, seed=args.seed)
        t0 = time.perf_counter()
        table = run_table(cfg)
        dt = time.perf_counter() - t0
        text = table.format()
        print(f"\n== {name} noise ({args.seeds} seeds/cell, k_max = {args.k_max}, {dt:.0f} s) ==")
        print(text)
        (out / f"table_{name}.txt").write_text(text + "\n")
        table.write_csv(out / f"table_{name}.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
