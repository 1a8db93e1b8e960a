"""Rigid rotation of a Gaussian blob for one period; L1 return error versus grid size.

    python scripts/rotation_convergence.py --sizes 32 64 128 256
"""

import argparse
import math

import numpy as np

from liouville_lab.liouville_solver import assemble_operator, evolve, max_stable_dt, rotation_field
from liouville_lab.phase_space import DensityField, PhaseGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--cfl", type=float, default=0.9)
    ap.add_argument("--method", choices=["euler", "rk2"], default="euler")
    args = ap.parse_args()

    rot = rotation_field()
    prev = None
    print(f"{'n':>5} {'steps':>6} {'L1 error':>10} {'ratio':>7} {'mass drift':>11}")
    for n in args.sizes:
        g = PhaseGrid(2, n, -1.0, 1.0)
        k = math.ceil(2 * math.pi / max_stable_dt(g, rot, args.cfl))
        p0 = DensityField.gaussian(g, [0.4, 0.0], 0.15)
        p, diag = evolve(p0, assemble_operator(g, rot), 2 * math.pi / k, k, args.method)
        err = float(np.sum(np.abs(p.values - p0.values)))
        ratio = f"{prev / err:7.3f}" if prev else " " * 7
        print(f"{n:>5} {k:>6} {err:>10.5f} {ratio} {diag.max_mass_drift():>11.1e}")
        prev = err


if __name__ == "__main__":
    main()
