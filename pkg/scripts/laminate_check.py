"""Compare the FE homogenized tensor of a two-phase laminate with the closed-form laminate tensor.

    python3 scripts/laminate_check.py --grid 16 --contrast 10 --fraction 0.5
"""
import argparse
import time

import numpy as np

from cellhom.core import Grid, Lattice
from cellhom.homogenize import homogenized_tensor, laminate_normal, laminate_oracle
from cellhom.material import Phase, laminate_map


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--contrast", type=float, default=10.0)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--shear", type=float, default=0.0, help="g2 = (shear, 1, 0)")
    args = p.parse_args()

    lat = Lattice(((1.0, args.shear, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))
    grid = Grid.cube(args.grid, lat)
    soft, stiff = Phase.isotropic(1, 1), Phase.isotropic(args.contrast, args.contrast)
    np.set_printoptions(precision=6, suppress=True, linewidth=120)
    for axis in range(3):
        t0 = time.perf_counter()
        rep = homogenized_tensor(laminate_map(grid, stiff, soft, args.fraction, axis=axis))
        oracle = laminate_oracle(stiff.stiffness, soft.stiffness, args.fraction, laminate_normal(lat, axis))
        err = np.linalg.norm(rep.CH - oracle) / np.linalg.norm(oracle)
        print(f"axis {axis}: relative error {err:.3e}, iterations {rep.iterations}, "
              f"{time.perf_counter() - t0:.2f} s")
    print("CH (last axis):")
    print(rep.CH)


if __name__ == "__main__":
    main()
