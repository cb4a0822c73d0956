"""Empirical Lojasiewicz exponents at every critical component of the test function.

    python scripts/kl_exponents.py [--radius 0.3] [--n-samples 2000]

Also shows that sampling strictly inside the plateau yields no data.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from sgdlab.diagnostics import NoDataError, estimate_lojasiewicz_exponent
from sgdlab.objective import make_piecewise


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--radius", type=float, default=0.3)
    p.add_argument("--n-samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    f = make_piecewise()
    print(f"{'component':<10} {'label':<11} {'F*':>9} {'theta_hat':>10} {'R^2':>10} {'n':>6}")
    for comp in f.critical_catalog:
        fit = estimate_lojasiewicz_exponent(f, comp, args.radius, args.n_samples,
                                            np.random.default_rng(args.seed))
        print(f"{comp.name:<10} {comp.label:<11} {comp.value:>9.4f} {fit.theta:>10.4f} {fit.r2:>10.6f} {fit.n:>6}")
    try:
        estimate_lojasiewicz_exponent(f, f.component("plateau"), 0.5, args.n_samples,
                                      np.random.default_rng(args.seed), center=2 * math.pi)
    except NoDataError as exc:
        print(f"plateau interior: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
