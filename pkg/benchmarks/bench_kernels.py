"""Time the pure-Python and compiled integral kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--threads N]

Reports per-kernel wall time for each backend, the speed-up, and the largest
absolute difference between the two results.
"""
import argparse
import os
import sys
import time

import numpy as np

from gbsopt.basis import NuclearField, basis_from_shells, parse_gaussian94
from gbsopt.integrals import PrimitiveTable, get_backend
from gbsopt.integrals.engine import expand_functions

HERE = os.path.dirname(os.path.abspath(__file__))


def h_chain_prims(n, basis_file):
    with open(os.path.join(HERE, "..", "data", basis_file)) as fh:
        shells = parse_gaussian94(fh.read())
    field = NuclearField([[0.0, 0.0, float(i)] for i in range(n)], [1.0] * n, ("H",) * n)
    table = PrimitiveTable()
    expand_functions(basis_from_shells(shells, field).functions, table)
    return table.unique(), field


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)
    py = get_backend("python")
    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled backend not built; nothing to compare", file=sys.stderr)
        return 1
    cases = [("H4 / 6-31G", 4, "6-31g.gbs"), ("H2 / cc-pVDZ", 2, "cc-pvdz.gbs")]
    print(f"{'system':<14} {'kernel':<9} {'n_prim':>6} {'python s':>10} {'cython s':>10} {'speed-up':>9} {'max diff':>9}")
    for label, n, fname in cases:
        prims, field = h_chain_prims(n, fname)
        kernels = {
            "overlap": lambda m: m.overlap_matrix(prims, prims, threads=args.threads),
            "kinetic": lambda m: m.kinetic_matrix(prims, prims, threads=args.threads),
            "nuclear": lambda m: m.nuclear_matrix(prims, prims, field.charges, field.positions,
                                                  threads=args.threads),
            "eri": lambda m: m.eri_tensor(prims, threads=args.threads),
        }
        for name, k in kernels.items():
            tp, rp = best_of(lambda: k(py), 1 if name == "eri" else args.repeat)
            tc, rc = best_of(lambda: k(cy), args.repeat)
            print(f"{label:<14} {name:<9} {len(prims[0]):>6} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f}x "
                  f"{np.max(np.abs(rp - rc)):>9.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
