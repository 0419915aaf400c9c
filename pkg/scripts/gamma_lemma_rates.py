"""Error of the two-term Gamma-ratio expansion under doubling of n.

Prints n^2 |err| and n^(2-x) |err|; only the second settles to a constant when x != 0.

    python3 scripts/gamma_lemma_rates.py
"""

from erwdelay.verify import GAMMA_XS, gamma_errors


def main():
    for x in GAMMA_XS:
        ns, err = gamma_errors(x)
        print(f"x = {x:+.1f}")
        for n, e in zip(ns, err):
            print(f"  n = {int(n):>6}  n^2 err = {n**2 * e:.6e}  n^(2-x) err = {n ** (2 - x) * e:.6e}")


if __name__ == "__main__":
    main()
