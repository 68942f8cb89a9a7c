"""Oscillating-product errors against n for a random divergence-free stress and displacement.

    python3 scripts/divcurl_demo.py --grid 8 --nmax 64 --csv divcurl.csv
"""
import argparse

import numpy as np

from cellhom.analysis import decay_exponent, div_curl_demo, oscillation_demo
from cellhom.core import Grid, LPField
from cellhom.discrete import make_divfree
from cellhom.donati import random_symfield, random_vecfield
from cellhom.io import write_oscillation_csv


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--nmax", type=int, default=64)
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--csv")
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    grid = Grid.cube(args.grid)
    sig = make_divfree(random_symfield(grid, rng) + rng.standard_normal(6))
    v = LPField(rng.standard_normal(6), random_vecfield(grid, rng))
    one = np.ones_like
    sched = range(1, args.nmax + 1)
    recs = div_curl_demo(sig, v, args.row, sched, (lambda x: x, np.cos, one))
    osc = oscillation_demo(lambda a, b, c: np.sin(2 * np.pi * a), sched, (lambda x: x, one, one))

    print(f"{'n':>4} {'div-curl error':>16} {'sin error':>16}")
    for r, s in zip(recs, osc):
        if r.n & (r.n - 1) == 0:
            print(f"{r.n:>4} {r.error:>16.6e} {s.error:>16.6e}")
    print(f"fitted exponents: div-curl {decay_exponent(recs):.3f}, sin {decay_exponent(osc):.3f}")
    if args.csv:
        write_oscillation_csv(args.csv, recs)


if __name__ == "__main__":
    main()
