"""Top of the discrete Korn spectra on a sequence of grids.

    python3 scripts/korn_spectrum.py --grids 4 8 16
"""
import argparse
import time

from cellhom.analysis import isomorphism_constant, korn_constant, lambda_grad
from cellhom.core import Grid


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grids", type=int, nargs="+", default=[4, 8, 16])
    args = p.parse_args()
    print(f"{'n':>4} {'lambda_grad':>18} {'C_korn':>10} {'C_iso':>10} {'time':>7}")
    for n in args.grids:
        g = Grid.cube(n)
        t0 = time.perf_counter()
        lam = lambda_grad(g)
        ck = korn_constant(g)
        ci = isomorphism_constant(g)
        print(f"{n:>4} {lam:>18.14f} {ck:>10.6f} {ci:>10.6f} {time.perf_counter() - t0:>6.1f}s")


if __name__ == "__main__":
    main()
