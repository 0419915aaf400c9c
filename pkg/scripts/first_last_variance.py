"""First-and-last memory on the branch I*_1 = 1: which constant does Var(N*_n)/n approach?

Compares the exact moment recursion and a Monte Carlo ensemble with
6r(1-r)/(1+r)^2 and with the two-state chain value 2r(1-r)(3-r)/(1+r)^3.

    python3 scripts/first_last_variance.py --r 0.5 --reps 100000 --seed 7
"""

import argparse

import numpy as np

from erwdelay import FIRST_AND_LAST, ProbTriple
from erwdelay.analytics import limit_constants, mixed_kernel_moments
from erwdelay.montecarlo import EnsembleSpec, run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    r = args.r
    lc = limit_constants(r)
    print(f"r = {r}")
    print(f"  6r(1-r)/(1+r)^2            = {lc.sigma_star_sq:.6f}")
    print(f"  2r(1-r)(3-r)/(1+r)^3       = {lc.first_last_chain_variance:.6f}")
    print("  exact recursion Var(N*_n)/n:")
    for n in (10, 100, 1000, 10_000, 100_000):
        print(f"    n = {n:>6}: {mixed_kernel_moments(n, r).variance / n:.6f}")

    spec = EnsembleSpec(FIRST_AND_LAST, ProbTriple.symmetric(r), args.n, args.reps, args.seed,
                        checkpoints=(args.n,), keep_samples=True)
    s = run_ensemble(spec)
    branch = s.samples.nonzeros[s.samples.first == 1, 0].astype(float)
    print(f"  Monte Carlo, n = {args.n}, {branch.size} branch paths: Var/n = {branch.var(ddof=1) / args.n:.6f}")
    print(f"  Monte Carlo mean N*_n/n = {np.mean(branch) / args.n:.6f} (limit {lc.first_last_branch_rate:.6f})")


if __name__ == "__main__":
    main()
