"""Qubit counts for the reference problem shapes and the quantum/classical cost crossover.

    python scripts/resource_tables.py --csv crossover.csv
"""

import argparse

from liouville_lab.resource_estimator import (
    ProblemShape,
    crossover_sweep,
    dynamic_approach_qubits,
    qubits_full,
    qubits_marginal,
    sweep_csv,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--csv", help="write the crossover sweep here")
    args = ap.parse_args()

    print(f"{'z':>3} {'F':>3} {'n':>6} {'marginal':>9} {'full (G=1e9)':>14}")
    for z, F in [(3, 1), (7, 4), (27, 4)]:
        marginal = qubits_marginal(ProblemShape(G=z, F=F, z=z, n=1000))
        full = qubits_full(ProblemShape(G=10**9, F=F, n=1000))
        print(f"{z:>3} {F:>3} {1000:>6} {marginal:>9} {full:>14}")
    print(f"dynamic approach, 1e24 degrees of freedom: {dynamic_approach_qubits(10**24)} qubits")

    rows = crossover_sweep(log2_G=range(10, 41, 5))
    print(f"\n{'log2 G':>6} {'quantum':>12} {'classical':>12} {'ratio':>10}")
    for r in rows:
        print(f"{r['log2_G']:>6} {r['cost_quantum']:>12.4g} {r['cost_classical']:>12.4g} {r['ratio']:>10.3g}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(sweep_csv(crossover_sweep(log2_G=range(10, 41))))


if __name__ == "__main__":
    main()
