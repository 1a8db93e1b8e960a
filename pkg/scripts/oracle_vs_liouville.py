"""Three-site Burgers ring: Monte Carlo histogram against the three-point Liouville solver.

    python scripts/oracle_vs_liouville.py --n 64 --count 100000
"""

import argparse
import math
import time

import numpy as np

from liouville_lab.burgers_dynamics import DynamicsSpec, SpatialGrid
from liouville_lab.ensemble_oracle import (
    HistogramMode,
    InitialEnsembleSpec,
    empirical_pdf,
    run_ensemble,
    sample_initial_conditions,
    sample_moments,
)
from liouville_lab.liouville_solver import max_stable_dt
from liouville_lab.marginal_solver import ClosureSpec, assemble_3pt_operator, effective_field, evolve_3pt
from liouville_lab.phase_space import DensityField, PhaseGrid, axis_means, kinetic_energy, marginalize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--count", type=int, default=100_000)
    ap.add_argument("--nu", type=float, default=0.1)
    ap.add_argument("--sigma", type=float, default=0.3)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    base = [0.5, -0.2, -0.3]
    spec, ring = DynamicsSpec("consistent_central", args.nu), SpatialGrid(3)
    phase = PhaseGrid(3, args.n, -2.0, 2.0)

    t0 = time.perf_counter()
    field = effective_field(ClosureSpec("triplet_periodic"), spec)
    steps = math.ceil(args.T / max_stable_dt(phase, field.as_velocity(), 0.9))
    p, diag = evolve_3pt(DensityField.gaussian(phase, base, args.sigma), assemble_3pt_operator(phase, field), args.T / steps, steps)
    t_solver = time.perf_counter() - t0

    t0 = time.perf_counter()
    ens = InitialEnsembleSpec(np.array(base), "gaussian", args.sigma, args.count, args.seed)
    bundle = run_ensemble(sample_initial_conditions(ens, ring), spec, ring, 0.01, round(args.T / 0.01), workers=args.threads)
    hist = empirical_pdf(bundle, phase, [0, 1, 2], HistogramMode("snapshot", -1))
    oracle = hist.field.normalized()
    se = sample_moments(bundle)["mean_se"]
    t_oracle = time.perf_counter() - t0

    print(f"solver: {steps} steps in {t_solver:.2f}s, mass drift {diag.max_mass_drift():.1e}")
    print(f"oracle: {args.count} samples in {t_oracle:.2f}s, out of range {hist.out_of_range:.1e}")
    print(f"{'axis':>4} {'solver':>10} {'oracle':>10} {'3 SE':>8} {'L1(1pt)':>9}")
    for a, (ms, mo, s) in enumerate(zip(axis_means(p), axis_means(oracle), se)):
        l1 = np.sum(np.abs(marginalize(p, [a]).values - marginalize(oracle, [a]).values))
        print(f"{a:>4} {ms:>10.5f} {mo:>10.5f} {3 * s:>8.5f} {l1:>9.4f}")
    ks, ko = kinetic_energy(p), kinetic_energy(oracle)
    print(f"kinetic energy: solver {ks:.5f} oracle {ko:.5f} rel diff {abs(ks - ko) / ko:.2%}")


if __name__ == "__main__":
    main()
