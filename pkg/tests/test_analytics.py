import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from erwdelay import FIRST_AND_LAST, LAST_ONLY
from erwdelay.analytics import (
    DifferenceEq,
    bracket_expectation,
    c_constant,
    c_partial_sums,
    difference_eq_asymptotic,
    first_only_mean,
    first_only_variance,
    full_alpha,
    full_mean,
    full_moment_table,
    full_second_moment,
    gamma_ratio_asymptotic,
    gamma_ratio_exact,
    geometric_law,
    limit_constants,
    martingale_scalers,
    mixed_kernel_moments,
    solve_difference_eq,
)
from erwdelay.oracle import exact_distribution, exact_moment

mpmath.mp.dps = 50


def mp_ratio(n, x):
    return float(mpmath.exp(mpmath.loggamma(mpmath.mpf(n) + 1 + mpmath.mpf(x)) - mpmath.loggamma(mpmath.mpf(n) + 1)))


# --- Gamma ratios -------------------------------------------------------------


def test_gamma_ratio_identities():
    for n in (1, 7, 1000, 10**9):
        assert gamma_ratio_exact(n, 0) == 1.0
        assert gamma_ratio_exact(n, 1) == pytest.approx(n + 1, rel=1e-14)


def test_gamma_ratio_reference_value():
    assert gamma_ratio_exact(99, 0.5) == pytest.approx(mp_ratio(99, 0.5), rel=1e-13)
    assert gamma_ratio_exact(99, 0.5) == pytest.approx(9.98750786, abs=5e-8)


@pytest.mark.parametrize("x", [-0.9, -0.5, -0.3, 0.3, 0.5, 0.75, 1.5, 2.7])
def test_gamma_ratio_against_50_digit_reference(x):
    ns = [0.5, 1, 3, 12, 99, 1e3, 12345, 1e6, 1e8, 1e9]
    for n in ns:
        if n + 1 + x <= 0:
            continue
        assert gamma_ratio_exact(n, x) == pytest.approx(mp_ratio(n, x), rel=1e-12)


def test_gamma_ratio_rejects_poles():
    with pytest.raises(ValueError):
        gamma_ratio_exact(1, -2)
    with pytest.raises(ValueError):
        gamma_ratio_exact(-1, 0.5)


def test_gamma_ratio_vectorized():
    ns = np.array([1, 10, 100])
    assert np.allclose(gamma_ratio_exact(ns, 0.5), [gamma_ratio_exact(int(n), 0.5) for n in ns], rtol=0, atol=0)


def test_gamma_asymptotic_trivial_cases():
    assert gamma_ratio_asymptotic(50, 0) == 1.0
    assert gamma_ratio_asymptotic(50, -1) == pytest.approx(1 / 50, rel=1e-15)


def test_gamma_asymptotic_error_is_order_n_minus_2_at_100():
    err = lambda n: abs(gamma_ratio_exact(n, 0.5) - gamma_ratio_asymptotic(n, 0.5))
    c_est = err(200) * 200**2
    # an O(n^-2) error (up to the n^x factor) at 100 is bounded by the doubling estimate
    assert err(100) <= 4 * c_est / 100**2
    assert err(100) > 0


# --- difference equations ------------------------------------------------------


def test_difference_eq_constant_forcing():
    assert solve_difference_eq(DifferenceEq(0.0, lambda k: 2.5, 7.0), 5) == 2.5
    for n in range(1, 30):
        assert solve_difference_eq(DifferenceEq(0.5, lambda k: 1.0, 0.0), n) == pytest.approx(
            2 * (1 - 2.0 ** (-(n - 1))), abs=1e-15
        )


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_difference_eq_indicator_recursion(r):
    a = (1 - r) / 2
    x = 1.0
    for n in range(1, 60):
        assert solve_difference_eq(DifferenceEq(a, lambda k: a, 1.0), n) == pytest.approx(x, abs=1e-12)
        x = a * x + a


def test_difference_eq_asymptotic():
    assert difference_eq_asymptotic(0.3, 2.0, 0.0, 40) == pytest.approx(2.0 / 0.7, rel=1e-15)
    assert difference_eq_asymptotic(0.25, 0.25, 0.0, 10) == pytest.approx(1 / 3, rel=1e-15)
    gaps = []
    for n in (50, 100, 200, 400, 800):
        exact = solve_difference_eq(DifferenceEq.power(0.4, 1.5, 1.0, 0.0), n)
        gaps.append(abs(exact - difference_eq_asymptotic(0.4, 1.5, 1.0, n)) / exact)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    with pytest.raises(ValueError):
        difference_eq_asymptotic(1.0, 1.0, 0.0, 10)
    with pytest.raises(ValueError):
        difference_eq_asymptotic(0.5, 1.0, -1.0, 10)


def test_martingale_scalers():
    ms = martingale_scalers(lambda k: 1.0, lambda k: 0.0, 20)
    assert np.all(ms.alpha == 1.0) and np.all(ms.beta == 0.0)
    with pytest.raises(ValueError):
        martingale_scalers([1.0, 0.0, 1.0], [0.0, 0.0, 0.0], 4)
    r = 0.5
    ms = martingale_scalers(lambda k: (k + 1 - r) / k, lambda k: 0.0, 200)
    assert ms.alpha[1] == pytest.approx(2 / 3, rel=1e-15)
    k = np.arange(1, 201)
    gamma_form = np.array([math.exp(math.lgamma(j) + math.lgamma(2 - r) - math.lgamma(j + 1 - r)) for j in k])
    assert np.allclose(ms.alpha, gamma_form, rtol=1e-12, atol=0)
    assert np.allclose(full_alpha(k, r), gamma_form, rtol=1e-12, atol=0)


# --- full memory ----------------------------------------------------------------


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_full_mean_small_n(r):
    assert full_mean(1, r) == pytest.approx(1 - r, rel=1e-14)
    assert full_mean(2, r) == pytest.approx((1 - r) * (2 - r), rel=1e-14)
    assert full_mean(3, 0.5) == pytest.approx(0.9375, rel=1e-14)


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_full_mean_one_step_recursion(r):
    n = np.arange(1, 10**6)
    m = full_mean(np.arange(1, 10**6 + 1), r)
    assert np.max(np.abs(m[1:] / (m[:-1] * (1 + (1 - r) / n)) - 1)) < 1e-12


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_martingale_mean_is_constant(r):
    n = np.arange(1, 5001)
    assert np.max(np.abs(full_alpha(n, r) * full_mean(n, r) - (1 - r))) < 1e-12


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_full_mean_two_code_paths_agree(r):
    # closed form via Gamma ratio vs iterated product
    table = full_moment_table(2000, r)
    assert np.allclose(table.mean, full_mean(np.arange(1, 2001), r), rtol=1e-12, atol=0)


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_mean_expansion_remainder_is_order_n_minus_r_minus_1(r):
    g = math.gamma(1 - r)
    cs = []
    for k in range(8, 19, 2):
        n = 2**k
        d = full_mean(n + 1, r) - n ** (1 - r) / g - n ** (-r) * (1 - r) * (2 - r) / (2 * g)
        cs.append(d * n ** (r + 1))
    ratios = np.array(cs[1:]) / np.array(cs[:-1])
    assert np.all(np.abs(ratios - 1) < 0.02)


def test_full_second_moment():
    for r in (0.2, 0.5, 0.8):
        assert full_second_moment(1, r) == pytest.approx(1 - r, rel=1e-15)
    assert full_second_moment(2, 0.5) == pytest.approx(1.25, rel=1e-15)
    lc = limit_constants(0.5)
    assert full_second_moment(10**6, 0.5) / 10**6 == pytest.approx(lc.d_r, rel=0.01)


def test_limit_constants_closed_forms():
    lc = limit_constants(0.5)
    assert lc.sigma_star_sq == pytest.approx(2 / 3, rel=1e-15)
    assert lc.mean_limit == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)
    assert lc.first_last_mean_offset == pytest.approx(8 / 9, rel=1e-15)
    assert lc.last_geometric_mean == pytest.approx(1.0)
    for r in (0.1, 0.3, 0.5, 0.7, 0.9):
        c = limit_constants(r)
        assert 0 < c.sigma_star_sq < 1.5
        assert c.c_r > 0 and math.isfinite(c.c_r)


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_c_constant_against_high_precision_series(r):
    # mpmath sums the series with the Euler-Maclaurin tail; the series is slow so use a
    # direct head plus the integral-asymptotic tail computed at 50 digits
    head = mpmath.fsum(mpmath.gamma(k + 1 - r) / mpmath.gamma(k + 3 - 2 * r) for k in range(1, 20001))
    K = 20000
    # tail via the exact telescoping identity evaluated at 50 digits
    tail = mpmath.gamma(K + 2 - r) / ((1 - r) * mpmath.gamma(K + 3 - 2 * r))
    assert c_constant(r) == pytest.approx(float(head + tail), rel=1e-12)


def test_c_partial_sums_against_brute_force():
    r = 0.5
    terms = 10**7
    k = np.arange(1, terms + 1, dtype=float)
    direct = math.fsum(1.0 / special.poch(k + 1 - r, 2 - r))
    assert c_partial_sums(r, terms)[-1] == pytest.approx(direct, abs=1e-10)


def test_d_and_variance_limit_at_half():
    lc = limit_constants(0.5)
    assert lc.d_r == pytest.approx(1.0, rel=1e-12)
    assert lc.var_limit == pytest.approx(1 - 1 / math.pi, rel=1e-12)


def test_bracket_expectation():
    for r in (0.2, 0.5, 0.8):
        assert bracket_expectation(1, r) == pytest.approx(r * (1 - r), rel=1e-15)
    table = full_moment_table(10**5, 0.5)
    assert np.all(np.diff(table.bracket) >= 0)
    # the bracket of the martingale equals its variance
    assert np.allclose(table.bracket, table.alpha**2 * table.variance, rtol=1e-9)


def test_bracket_bounded_by_its_limit():
    lc = limit_constants(0.5)
    b5, b6 = bracket_expectation(10**5, 0.5), bracket_expectation(10**6, 0.5)
    assert b5 < b6 < lc.var_y_moments
    assert b6 == pytest.approx(lc.var_y_moments, rel=1e-3)
    # increments decay like k^(-3/2): the remaining change is a few tenths of a percent
    assert (b6 - b5) / b5 < 5e-3


def test_var_y_forms():
    lc = limit_constants(0.5)
    assert lc.var_y_moments == pytest.approx(0.25 * (math.pi - 1), rel=1e-12)
    assert lc.var_y_remark < 0


# --- other kernels --------------------------------------------------------------


def test_geometric_law():
    assert geometric_law(3, 0.5).as_dict() == {0: 0.5, 1: 0.25, 2: 0.125, 3: 0.125}
    assert geometric_law(1, 0.3).as_dict() == pytest.approx({0: 0.3, 1: 0.7})
    for r in (0.1, 0.5, 0.9):
        law = geometric_law(200, r)
        assert abs(sum(law.probs) - 1) < 1e-14
        assert law.mean() == pytest.approx((1 - r) / r, rel=1e-9)
    for n in range(1, 13):
        exact = exact_distribution(LAST_ONLY, n, 0.3, exact=False)
        assert geometric_law(n, 0.3).tv_distance(exact) < 1e-12


def test_first_only_moments_match_oracle():
    for n in (1, 5, 14):
        law = exact_distribution(__import__("erwdelay").FIRST_ONLY, n, 0.3, exact=False)
        assert first_only_mean(n, 0.3) == pytest.approx(law.mean(), rel=1e-12)
        assert first_only_variance(n, 0.3) == pytest.approx(law.variance(), rel=1e-12)


def test_mixed_kernel_small_n():
    row = mixed_kernel_moments(1, 0.5)
    assert (row.e_count, row.e_indicator) == (1.0, 1.0)
    for r in (0.2, 0.5):
        assert mixed_kernel_moments(2, r).e_indicator == pytest.approx(1 - r)


@pytest.mark.parametrize("r", [Fraction(1, 5), Fraction(1, 2), Fraction(4, 5)])
def test_mixed_kernel_exact_against_oracle(r):
    for n in range(1, 15):
        row = mixed_kernel_moments(n, r)
        assert row.e_count == exact_moment(FIRST_AND_LAST, n, r, 1, condition_on_first_nonzero=True)
        assert row.e_count_sq == exact_moment(FIRST_AND_LAST, n, r, 2, condition_on_first_nonzero=True)


def two_state_chain_variance(r):
    """Asymptotic variance of the nonzero indicator as a Markov chain, from its matrix."""
    P = np.array([[(1 + r) / 2, (1 - r) / 2], [r, 1 - r]])  # states: zero, nonzero
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi /= pi.sum()
    f = np.array([0.0, 1.0])
    fc = f - pi @ f
    Z = np.linalg.inv(np.eye(2) - P + np.outer(np.ones(2), pi))
    return float(pi @ (fc * (2 * Z @ fc - fc))), float(pi[1])


@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_mixed_kernel_limits(r):
    var_chain, rate = two_state_chain_variance(r)
    lc = limit_constants(r)
    assert lc.first_last_chain_variance == pytest.approx(var_chain, rel=1e-12)
    assert lc.first_last_branch_rate == pytest.approx(rate, rel=1e-12)
    n = 10**5
    row = mixed_kernel_moments(n, r)
    assert row.e_count - n * rate == pytest.approx(lc.first_last_mean_offset, abs=1e-3)
    assert row.variance / n == pytest.approx(var_chain, abs=1e-3)
    # Cauchy over doubling n
    v = [mixed_kernel_moments(m, r).variance / m for m in (10**4, 2 * 10**4, 4 * 10**4)]
    assert abs(v[2] - v[1]) < abs(v[1] - v[0])
    assert row.variance >= 0


@given(n=st.integers(1, 200), r=st.floats(0.01, 0.99))
def test_moment_table_invariants(n, r):
    t = full_moment_table(n, r)
    assert np.all(t.variance >= -1e-9 * np.maximum(1, t.second))
    assert np.all((0 <= t.mean) & (t.mean <= t.n))
    row = mixed_kernel_moments(n, r)
    assert row.variance >= -1e-9 and 0 <= row.e_count <= n
