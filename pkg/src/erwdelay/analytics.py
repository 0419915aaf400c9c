"""Exact and asymptotic moment computations for the nonzero-step count N*_n.

Everything here is deterministic: Gamma-function ratios, first-order linear
difference equations, martingale normalizers, the moment recursions of the
full-memory and first-and-last kernels, and the constants of the limit laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .pmf import Pmf

# B_{2k} / (2k (2k-1)) for the Stirling series of log Gamma
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)
_SHIFT_TO = 16.0


def _stirling_tail(z: float) -> float:
    zi = 1.0 / z
    zi2 = zi * zi
    acc = 0.0
    for coef in reversed(_STIRLING):
        acc = acc * zi2 + coef
    return acc * zi


def _log_ratio_large(z: float, x: float) -> float:
    # log Gamma(z + x) - log Gamma(z) for z, z + x >= _SHIFT_TO
    return (
        x * math.log(z)
        + (z + x - 0.5) * math.log1p(x / z)
        - x
        + (_stirling_tail(z + x) - _stirling_tail(z))
    )


def _gamma_ratio_scalar(n: float, x: float) -> float:
    z = n + 1.0
    if z + x <= 0 or z <= 0:
        raise ValueError(f"Gamma argument not positive: n={n!r}, x={x!r}")
    if x == 0:
        return 1.0
    lo = min(z, z + x)
    k = 0 if lo >= _SHIFT_TO else int(math.ceil(_SHIFT_TO - lo))
    # Gamma(z+x)/Gamma(z) = [Gamma(z+k+x)/Gamma(z+k)] * prod_j (z+j)/(z+x+j)
    prod = 1.0
    for j in range(k):
        prod *= (z + j) / (z + x + j)
    return prod * math.exp(_log_ratio_large(z + k, x))


def gamma_ratio_exact(n, x):
    """Gamma(n + 1 + x) / Gamma(n + 1), accurate to ~1e-14 relative.

    Works in log space through the difference of Stirling series, so there
    is no cancellation between two huge log-Gamma values at large n.
    Accepts scalar or array ``n``.
    """
    if np.ndim(n) == 0:
        return _gamma_ratio_scalar(float(n), float(x))
    arr = np.asarray(n, dtype=float)
    return np.array([_gamma_ratio_scalar(v, float(x)) for v in arr.ravel()]).reshape(arr.shape)


def gamma_ratio_asymptotic(n, x):
    """Two-term expansion n^x (1 + x(1+x)/(2n))."""
    n = np.asarray(n, dtype=float) if np.ndim(n) else float(n)
    return n**x * (1.0 + x * (1.0 + x) / (2.0 * n))


SeqOrFn = Union[Sequence[float], Callable[[int], float]]


def _indexed(seq: SeqOrFn) -> Callable[[int], float]:
    """1-based accessor for a sequence or callable."""
    if callable(seq):
        return seq
    return lambda k: seq[k - 1]


@dataclass(frozen=True)
class DifferenceEq:
    """x_{n+1} = a x_n + b_n for n >= 1, started from x_1."""

    a: float
    b: SeqOrFn
    x1: float

    @classmethod
    def power(cls, a: float, b: float, gamma: float, x1: float) -> "DifferenceEq":
        return cls(a, lambda k: b * float(k) ** gamma, x1)


def solve_difference_eq(deq: DifferenceEq, n: int) -> float:
    """x_n = a^{n-1} x_1 + sum_{nu=0}^{n-2} a^nu b_{n-1-nu}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    b = _indexed(deq.b)
    total = deq.a ** (n - 1) * deq.x1
    apow = 1.0
    for nu in range(n - 1):
        total += apow * b(n - 1 - nu)
        apow *= deq.a
    return total


def difference_eq_asymptotic(a: float, b: float, gamma: float, n: int) -> float:
    """b_{n-1}/(1-a) - gamma a b_{n-1} / (n (1-a)^2) for b_n = b n^gamma."""
    if not abs(a) < 1:
        raise ValueError("asymptotic form needs |a| < 1")
    if not gamma > -1:
        raise ValueError("asymptotic form needs gamma > -1")
    bn1 = b * float(n - 1) ** gamma
    return bn1 / (1 - a) - gamma * a * bn1 / (n * (1 - a) ** 2)


@dataclass(frozen=True)
class MartingaleScalers:
    """alpha_k, beta_k for k = 1..n (index 0 holds k = 1)."""

    alpha: np.ndarray
    beta: np.ndarray


def martingale_scalers(a_seq: SeqOrFn, b_seq: SeqOrFn, n: int) -> MartingaleScalers:
    """Normalizers making alpha_n U_n + beta_n a martingale.

    For E(U_{n+1} | F_n) = a_n U_n + b_n: alpha_1 = 1, beta_1 = 0,
    alpha_n = prod_{k<n} 1/a_k and beta_n = -sum_{k<n} alpha_{k+1} b_k.
    """
    a = _indexed(a_seq)
    b = _indexed(b_seq)
    alpha = np.empty(n)
    beta = np.empty(n)
    alpha[0], beta[0] = 1.0, 0.0
    for k in range(1, n):
        ak = a(k)
        if ak == 0:
            raise ValueError(f"a_{k} = 0; scalers undefined")
        alpha[k] = alpha[k - 1] / ak
        beta[k] = beta[k - 1] - alpha[k] * b(k)
    return MartingaleScalers(alpha, beta)


# --- full memory -----------------------------------------------------------


def full_alpha(k, r):
    """alpha*_k = Gamma(k) Gamma(2-r) / Gamma(k+1-r)."""
    k = np.asarray(k) if np.ndim(k) else k
    return math.gamma(2 - r) / gamma_ratio_exact(k - 1, 1 - r)


def full_mean(n, r):
    """E(N*_n) = Gamma(n+1-r) / (Gamma(1-r) Gamma(n)) for full memory."""
    n = np.asarray(n) if np.ndim(n) else n
    if np.any(np.asarray(n) < 1):
        raise ValueError("n must be >= 1")
    return gamma_ratio_exact(n - 1, 1 - r) / math.gamma(1 - r)


@dataclass(frozen=True)
class FullMoments:
    """Full-memory moments for k = 1..n (array index k-1)."""

    r: float
    mean: np.ndarray
    second: np.ndarray
    alpha: np.ndarray
    bracket: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return self.second - self.mean**2

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.mean.size + 1)


def full_moment_table(n: int, r: float) -> FullMoments:
    """Iterate the mean / second-moment / bracket recursions up to n.

    E(N*_{k+1}) = (1 + (1-r)/k) E(N*_k)
    E((N*_{k+1})^2) = (1 + 2(1-r)/k) E((N*_k)^2) + (1-r)/k E(N*_k)
    E<M*>_{k+1} = E<M*>_k + alpha_{k+1}^2 ((1-r)/k E N*_k - (1-r)^2/k^2 E (N*_k)^2)
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s = 1.0 - r
    mean = np.empty(n)
    second = np.empty(n)
    alpha = np.empty(n)
    bracket = np.empty(n)
    m1, m2, al, br = s, s, 1.0, r * s
    mean[0], second[0], alpha[0], bracket[0] = m1, m2, al, br
    for k in range(1, n):
        al_next = al * k / (k + s)
        br += al_next * al_next * (s / k * m1 - s * s / (k * k) * m2)
        m2 = m2 * (1.0 + 2.0 * s / k) + s / k * m1
        m1 = m1 * (1.0 + s / k)
        al = al_next
        mean[k], second[k], alpha[k], bracket[k] = m1, m2, al, br
    return FullMoments(r, mean, second, alpha, bracket)


def full_second_moment(n: int, r: float) -> float:
    return float(full_moment_table(n, r).second[-1])


def bracket_expectation(n: int, r: float) -> float:
    """E<M*>_n for the full-memory martingale M*_n = alpha*_n N*_n."""
    return float(full_moment_table(n, r).bracket[-1])


def c_partial_sums(r: float, terms: int) -> np.ndarray:
    """Partial sums of sum_k Gamma(k+1-r)/Gamma(k+3-2r), k = 1..terms."""
    k = np.arange(1, terms, dtype=float)
    ratios = np.concatenate(([math.gamma(2 - r) / math.gamma(4 - 2 * r)], (k + 1 - r) / (k + 3 - 2 * r)))
    return np.cumsum(np.cumprod(ratios))


def c_constant(r: float, head: int = 64) -> float:
    """c_r with ``head`` explicit terms plus the exact telescoped remainder.

    Gamma(k+a)/Gamma(k+b) = [Gamma(k+a)/Gamma(k+b-1) - Gamma(k+a+1)/Gamma(k+b)]/(b-a-1),
    so the terms beyond K sum to Gamma(K+2-r) / ((1-r) Gamma(K+3-2r)).
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    term = math.gamma(2 - r) / math.gamma(4 - 2 * r)
    total = 0.0
    for k in range(1, head + 1):
        total += term
        term *= (k + 1 - r) / (k + 3 - 2 * r)
    tail = gamma_ratio_exact(head + 2 - 2 * r, r - 1) / (1 - r)
    return total + tail


@dataclass(frozen=True)
class LimitConstants:
    r: float
    c_r: float
    d_r: float
    mean_limit: float
    var_limit: float
    var_y_moments: float
    var_y_remark: float
    sigma_star_sq: float
    first_last_chain_variance: float
    first_only_rate: float
    first_only_zero_rate: float
    first_only_branch_rate: float
    first_only_branch_variance: float
    first_last_rate: float
    first_last_zero_rate: float
    first_last_branch_rate: float
    first_last_mean_offset: float
    last_geometric_mean: float
    last_geometric_second_moment: float

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.__dict__.items()}


def limit_constants(r: float) -> LimitConstants:
    """Constants of every limit statement, per kernel.

    ``var_y_moments`` is (1-r)^2 (Gamma(1-r)^2 d_r - 1), obtained from
    Var(N*_n/n^{1-r}) -> d_r - Gamma(1-r)^{-2} and Y = Gamma(2-r) lim N*_n/n^{1-r};
    ``var_y_remark`` is the alternative (1-r)^2 (d_r/Gamma(1-r)^2 - 1).
    ``sigma_star_sq`` is 6r(1-r)/(1+r)^2 as usually quoted for the
    first-and-last kernel; ``first_last_chain_variance`` is the asymptotic
    variance of the two-state chain, 2r(1-r)(3-r)/(1+r)^3.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    s = 1 - r
    g1 = math.gamma(s)
    c_r = c_constant(r)
    d_r = s / g1 * (c_r + g1 / (2 * s * math.gamma(2 * s)))
    return LimitConstants(
        r=r,
        c_r=c_r,
        d_r=d_r,
        mean_limit=1 / g1,
        var_limit=d_r - 1 / g1**2,
        var_y_moments=s**2 * (g1**2 * d_r - 1),
        var_y_remark=s**2 * (d_r / g1**2 - 1),
        sigma_star_sq=6 * r * s / (1 + r) ** 2,
        first_last_chain_variance=2 * r * s * (3 - r) / (1 + r) ** 3,
        first_only_rate=s**2,
        first_only_zero_rate=r * (2 - r),
        first_only_branch_rate=s,
        first_only_branch_variance=r * s,
        first_last_rate=s**2 / (1 + r),
        first_last_zero_rate=r * (3 - r) / (1 + r),
        first_last_branch_rate=s / (1 + r),
        first_last_mean_offset=4 * r / (1 + r) ** 2,
        last_geometric_mean=s / r,
        last_geometric_second_moment=s * (2 - r) / r**2,
    )


# --- first-only, last-only, first-and-last -----------------------------------


def first_only_mean(n: int, r: float) -> float:
    """E(N*_n) for the first-step-only memory (unconditional)."""
    s = 1 - r
    return s * (1 + (n - 1) * s)


def first_only_variance(n: int, r: float) -> float:
    """Var(N*_n): mixture of 0 (w.p. r) and 1 + Binomial(n-1, 1-r)."""
    s = 1 - r
    m_branch = 1 + (n - 1) * s
    second_branch = (n - 1) * r * s + m_branch**2
    mean = s * m_branch
    return s * second_branch - mean**2


@dataclass(frozen=True)
class MixedMoments:
    """First-and-last memory moments on the branch I*_1 = 1."""

    n: int
    e_indicator: float
    e_count: float
    e_count_indicator: float
    e_count_sq: float

    @property
    def variance(self) -> float:
        return self.e_count_sq - self.e_count**2


def mixed_kernel_moments(n: int, r, table: bool = False):
    """Iterate the coupled recursions for E(I*_n), E(N*_n), E(N*_n I*_n), E(N*_n^2).

    With a = (1-r)/2 and I*_1 = 1:
      E I*_{k+1}          = a + a E I*_k
      E N*_{k+1}          = E N*_k + a + a E I*_k
      E N*_{k+1} I*_{k+1} = a E N*_k I*_k + a E N*_k + a + a E I*_k
      E (N*_{k+1})^2      = E (N*_k)^2 + 2a E N*_k + 2a E N*_k I*_k + a + a E I*_k
    Returns the row at n, or every row 1..n when ``table`` is set.
    Exact if ``r`` is a Fraction.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a = (1 - r) / 2
    one = Fraction(1) if isinstance(r, Fraction) else 1.0
    ei, en, eni, en2 = one, one, one, one
    rows = [MixedMoments(1, ei, en, eni, en2)] if table else None
    for k in range(1, n):
        drift = a + a * ei
        en2 = en2 + 2 * a * en + 2 * a * eni + drift
        eni = a * eni + a * en + drift
        en = en + drift
        ei = drift
        if table:
            rows.append(MixedMoments(k + 1, ei, en, eni, en2))
    return rows if table else MixedMoments(n, ei, en, eni, en2)


def geometric_law(n: int, r) -> Pmf:
    """Law of N*_n under last-step-only memory.

    P(N*_n = k) = (1-r)^k r for k < n and P(N*_n = n) = (1-r)^n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s = 1 - r
    probs = [s**k * r for k in range(n)] + [s**n]
    return Pmf(tuple(range(n + 1)), tuple(probs))
