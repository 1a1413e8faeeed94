#!/usr/bin/env python
"""Scan q across (p-1, p/2) and print the stable-rate ordering.

The two stable eigenvalues of the critical-point linearization swap
dominance at q = q*(N, p).  Below q* the tail mode -theta is the slow
one; above it the mode -(p-2q)/(q-p+1) takes over.  The scan prints
both rates and marks the crossover row.
"""

import argparse

from extinction import ExponentParams, derive_constants, spectral_data


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--p", type=float, default=1.2)
    ap.add_argument("--steps", type=int, default=15)
    args = ap.parse_args()

    N, p = args.N, args.p
    lo, hi = p - 1.0, p / 2.0
    h = (hi - lo) / (args.steps + 1)
    qstar = None
    print(f"{'q':>9} {'lambda2':>10} {'lambda3':>10} {'slow rate':>10}")
    prev = None
    for k in range(1, args.steps + 1):
        q = lo + k * h
        c = derive_constants(ExponentParams(N, p, q))
        s = spectral_data(c)
        dom = "lambda2" if s.LambdaMax == s.lambda2 else "lambda3"
        qstar = s.qstar
        if prev is not None and dom != prev:
            print(f"{'-- crossover, q* = ':>20}{qstar:.6f} --")
        prev = dom
        print(f"{q:>9.5f} {s.lambda2:>10.5f} {s.lambda3:>10.5f} {dom:>10}")
    print(f"\nq*(N={N}, p={p}) = {qstar:.10f}")


if __name__ == "__main__":
    main()
