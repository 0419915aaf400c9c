"""Exact small-n laws of the nonzero-indicator chain I*_1, ..., I*_n.

Only whether a step is zero matters for the counts, and the probability of
a nonzero step is (1 - r) times the fraction of nonzero remembered steps,
whatever p and q are.  The dynamic program therefore runs over indicator
statistics only: a state is ``(I*_1, I*_t, N*_t, window bits)`` with the
fields a kernel does not need held at zero.

Rational arithmetic (``fractions.Fraction``) is used for n <= 14 by default,
floats beyond.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Iterator

from .pmf import Pmf
from .walk import MemoryKernel, ProbTriple, WalkState, advance, step_distribution

MAX_N = 24
MAX_N_WINDOW = 20
MAX_WINDOW = 8
EXACT_UP_TO = 14


class OracleBudgetError(ValueError):
    """Requested size is beyond what the exact DP is allowed to enumerate."""


class DegenerateError(ValueError):
    """A quantity is undefined because some variance or probability is zero."""


def _check_budget(kernel: MemoryKernel, n: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if kernel.kind == "window":
        if kernel.m > MAX_WINDOW or n > MAX_N_WINDOW:
            raise OracleBudgetError(
                f"window oracle limited to m <= {MAX_WINDOW}, n <= {MAX_N_WINDOW} "
                f"(got m={kernel.m}, n={n})"
            )
    elif n > MAX_N:
        raise OracleBudgetError(f"oracle limited to n <= {MAX_N} (got n={n})")


def _as_number(r, exact: bool):
    if not exact:
        return float(r)
    if isinstance(r, Fraction):
        return r
    return Fraction(str(r)) if isinstance(r, float) else Fraction(r)


def _resolve_exact(exact, n: int) -> bool:
    if exact == "auto":
        return n <= EXACT_UP_TO
    return bool(exact)


def _p_nonzero(kernel: MemoryKernel, state, t: int, s):
    first, last, count, bits = state
    kind = kernel.kind
    if kind == "full":
        return s * count / t
    if kind == "first":
        return s * first
    if kind == "last":
        return s * last
    if kind == "first-last":
        if t == 1:
            return s * first
        return s * (first + last) / 2
    size = min(t, kernel.m)
    return s * bin(bits).count("1") / size


def _layers(kernel: MemoryKernel, n: int, r, exact: bool, first: int | None = None) -> Iterator[tuple[int, dict]]:
    """Yield (t, {state: prob}) for t = 1..n."""
    rr = _as_number(r, exact)
    s = 1 - rr
    one = Fraction(1) if exact else 1.0
    window_mask = (1 << kernel.m) - 1 if kernel.kind == "window" else 0
    dist: dict = {}
    for b, pb in ((1, s), (0, rr)):
        if first is not None:
            if b != first:
                continue
            pb = one
        dist[(b, b, b, b if window_mask else 0)] = pb
    yield 1, dist
    for t in range(1, n):
        nxt: dict = defaultdict(lambda: 0 * one)
        for state, prob in dist.items():
            f, _, count, bits = state
            p1 = _p_nonzero(kernel, state, t, s)
            for b, pb in ((1, p1), (0, 1 - p1)):
                if pb == 0:
                    continue
                nb = ((bits << 1) | b) & window_mask
                nxt[(f, b, count + b, nb)] += prob * pb
        dist = dict(nxt)
        yield t + 1, dist


def state_law(kernel: MemoryKernel, n: int, r, exact="auto", first: int | None = None) -> dict:
    """Law at time n of the DP state ``(I*_1, I*_n, N*_n, window bits)``."""
    _check_budget(kernel, n)
    exact = _resolve_exact(exact, n)
    for t, dist in _layers(kernel, n, r, exact, first):
        if t == n:
            return dist
    raise AssertionError("unreachable")


def joint_law(kernel: MemoryKernel, n: int, r, exact="auto") -> dict[tuple[int, int], object]:
    """P(I*_1 = i, N*_n = k) keyed by (i, k)."""
    out: dict = defaultdict(int)
    for (f, _, count, _), prob in state_law(kernel, n, r, exact).items():
        out[(f, count)] += prob
    return dict(out)


def exact_distribution(
    kernel: MemoryKernel, n: int, r, exact="auto", condition_on_first_nonzero: bool = False
) -> Pmf:
    """Exact law of N*_n (optionally given I*_1 = 1)."""
    first = 1 if condition_on_first_nonzero else None
    law: dict = defaultdict(int)
    for (_, _, count, _), prob in state_law(kernel, n, r, exact, first).items():
        law[count] += prob
    return Pmf.from_mapping(law)


def exact_moment(
    kernel: MemoryKernel, n: int, r, order: int, condition_on_first_nonzero: bool = False, exact="auto"
):
    """E((N*_n)^order), optionally conditioned on I*_1 = 1."""
    if condition_on_first_nonzero and _as_number(r, False) >= 1:
        raise DegenerateError("cannot condition on I*_1 = 1: it has probability zero")
    return exact_distribution(kernel, n, r, exact, condition_on_first_nonzero).moment(order)


def absorption_probability(kernel: MemoryKernel, n: int, r, exact="auto"):
    """P(every remembered step is zero at time n); the walk is then frozen."""
    total = 0
    for (f, last, count, bits), prob in state_law(kernel, n, r, exact).items():
        kind = kernel.kind
        if kind == "full":
            dead = count == 0
        elif kind == "first":
            dead = f == 0
        elif kind == "last":
            dead = last == 0
        elif kind == "first-last":
            dead = f == 0 and (n == 1 or last == 0)
        else:
            dead = bits == 0
        if dead:
            total += prob
    return total


def martingale_check(n: int, r, scaler_r=None, exact="auto") -> float:
    """max |E(M*_{k+1} | state) - M*_k| over reachable full-memory states, k < n.

    M*_k = alpha*_k N*_k with alpha*_k = prod_{j<k} j/(j+1-r').  ``scaler_r``
    sets r' (default r); a wrong value is a deliberate fault injection.
    """
    kernel = MemoryKernel("full")
    if n > 20:
        raise OracleBudgetError("martingale_check limited to n <= 20")
    _check_budget(kernel, n)
    exact = _resolve_exact(exact, n)
    rr = _as_number(r, exact)
    rs = rr if scaler_r is None else _as_number(scaler_r, exact)
    s = 1 - rr
    one = Fraction(1) if exact else 1.0
    alpha = [one]  # alpha[k-1] = alpha*_k
    for j in range(1, n):
        alpha.append(alpha[-1] * j / (j + 1 - rs))
    worst = 0 * one
    for t, dist in _layers(kernel, n, rr, exact):
        if t == n:
            break
        for (_, _, count, _), prob in dist.items():
            if prob == 0:
                continue
            expected_next = alpha[t] * (count + s * count / t)
            worst = max(worst, abs(expected_next - alpha[t - 1] * count))
    return float(worst)


def correlation(kernel: MemoryKernel, n: int, r, condition_on_first_nonzero: bool = False, exact="auto") -> float:
    """Corr(I*_n, I*_{n+1}) from the exact joint law."""
    first = 1 if condition_on_first_nonzero else None
    _check_budget(kernel, n + 1)
    ex = _resolve_exact(exact, n)
    s = 1 - _as_number(r, ex)
    e_now = e_next = e_both = 0
    for state, prob in state_law(kernel, n, r, ex, first).items():
        p1 = _p_nonzero(kernel, state, n, s)
        last = state[1]
        e_now += prob * last
        e_next += prob * p1
        e_both += prob * last * p1
    var_now = e_now * (1 - e_now)
    var_next = e_next * (1 - e_next)
    if var_now == 0 or var_next == 0:
        raise DegenerateError(f"degenerate: an indicator is constant at n={n}")
    return float(e_both - e_now * e_next) / float(var_now * var_next) ** 0.5


def signed_distribution(kernel: MemoryKernel, n: int, params: ProbTriple) -> Pmf:
    """Law of N*_n from a DP over full signed walk states.

    Slow reference that keeps positions and signed memories, built on
    ``step_distribution``/``advance``; used to validate the indicator-only DP.
    """
    if n > 12:
        raise OracleBudgetError("signed reference DP limited to n <= 12")
    dist: dict = defaultdict(int)
    for x, prob in ((1, params.p), (-1, params.q), (0, params.r)):
        dist[advance(WalkState(), x, kernel)] += prob
    for _ in range(1, n):
        nxt: dict = defaultdict(int)
        for state, prob in dist.items():
            for x, px in step_distribution(state, kernel, params).as_dict().items():
                if px:
                    nxt[advance(state, x, kernel)] += prob * px
        dist = nxt
    law: dict = defaultdict(int)
    for state, prob in dist.items():
        law[state.nonzeros] += prob
    return Pmf.from_mapping(law)
