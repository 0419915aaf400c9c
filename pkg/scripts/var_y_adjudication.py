"""Full memory: Var(Y) for Y = lim M*_n, from exact moments, against the two closed forms.

    python3 scripts/var_y_adjudication.py --r 0.3 0.5 0.7
"""

import argparse

from erwdelay.analytics import full_moment_table, limit_constants


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r", type=float, nargs="+", default=[0.2, 0.5, 0.8])
    ap.add_argument("--n", type=int, default=10**6)
    args = ap.parse_args()
    print(f"{'r':>5} {'Var(M*_n)':>12} {'G^2 d - 1 form':>16} {'d/G^2 - 1 form':>16} "
          f"{'Var(N*/n^(1-r))':>16} {'d - G^-2':>10}")
    for r in args.r:
        t = full_moment_table(args.n, r)
        lc = limit_constants(r)
        var_m = t.alpha[-1] ** 2 * t.variance[-1]
        var_scaled = t.variance[-1] / args.n ** (2 * (1 - r))
        print(f"{r:5.2f} {var_m:12.6f} {lc.var_y_moments:16.6f} {lc.var_y_remark:16.6f} "
              f"{var_scaled:16.6f} {lc.var_limit:10.6f}")


if __name__ == "__main__":
    main()
