"""Monte Carlo vs exact law of N*_n for every kernel at small n (total-variation distance).

    python3 scripts/tv_bridge.py --r 0.4 --reps 1000000 --seed 17
"""

import argparse

import numpy as np

from erwdelay import FIRST_AND_LAST, FIRST_ONLY, FULL, LAST_ONLY, ProbTriple, last_window
from erwdelay.montecarlo import EnsembleSpec, run_ensemble
from erwdelay.oracle import exact_distribution
from erwdelay.pmf import Pmf


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r", type=float, default=0.4)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--reps", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args()
    for kernel in (FULL, FIRST_ONLY, LAST_ONLY, FIRST_AND_LAST, last_window(3)):
        spec = EnsembleSpec(kernel, ProbTriple.symmetric(args.r), args.n, args.reps, args.seed,
                            checkpoints=tuple(range(1, args.n + 1)), keep_samples=True)
        s = run_ensemble(spec)
        tvs = []
        for j, n in enumerate(s.checkpoints):
            counts = np.bincount(s.samples.nonzeros[:, j], minlength=n + 1)
            emp = Pmf.from_mapping({k: c / counts.sum() for k, c in enumerate(counts)})
            tvs.append(emp.tv_distance(exact_distribution(kernel, n, args.r, exact=False)))
        print(f"{kernel.label:>10}: max TV over n <= {args.n} = {max(tvs):.5f}")


if __name__ == "__main__":
    main()
