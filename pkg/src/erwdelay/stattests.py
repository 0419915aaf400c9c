"""Goodness-of-fit and convergence diagnostics against the limit laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .analytics import full_alpha
from .montecarlo import HIST_EDGES, Histogram

MIN_SAMPLES = 1000


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class Normal:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be >= 0")

    def cdf(self, x):
        if self.variance == 0:
            return np.where(np.asarray(x) >= self.mean, 1.0, 0.0)
        return stats.norm.cdf(x, loc=self.mean, scale=math.sqrt(self.variance))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, math.sqrt(self.variance), size)


@dataclass(frozen=True)
class Geometric:
    """P(Z = k) = (1-r)^k r on k = 0, 1, ...; mean (1-r)/r."""

    r: float

    def __post_init__(self):
        if not 0 < self.r <= 1:
            raise ValueError("success probability must lie in (0, 1]")

    def pmf(self, k):
        return (1 - self.r) ** np.asarray(k, dtype=float) * self.r

    def cdf(self, x):
        k = np.floor(np.asarray(x, dtype=float))
        return np.where(k < 0, 0.0, 1 - (1 - self.r) ** (k + 1))

    @property
    def mean(self) -> float:
        return (1 - self.r) / self.r

    @property
    def second_moment(self) -> float:
        return (1 - self.r) * (2 - self.r) / self.r**2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.geometric(self.r, size) - 1


@dataclass(frozen=True)
class MixtureNormalAtom:
    """(1 - atom_weight) N(0, variance) + atom_weight delta_0."""

    variance: float
    atom_weight: float

    def __post_init__(self):
        if self.variance < 0 or not 0 <= self.atom_weight <= 1:
            raise ValueError("need variance >= 0 and atom weight in [0, 1]")

    @property
    def weight_normal(self) -> float:
        return 1 - self.atom_weight

    @property
    def normal(self) -> Normal:
        return Normal(0.0, self.variance)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.weight_normal * self.normal.cdf(x) + self.atom_weight * (x >= 0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        atom = rng.random(size) < self.atom_weight
        return np.where(atom, 0.0, self.normal.sample(rng, size))


@dataclass(frozen=True)
class Constant:
    value: float

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.value))


LimitLaw = Normal | Geometric | MixtureNormalAtom | Constant


@dataclass
class TestReport:
    """One check; it passes iff ``value <= threshold``.

    ``primary`` marks checks that count towards a verify run's exit code.
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: str
    value: float
    threshold: float
    sample_size: int = 0
    n: int | None = None
    primary: bool = True
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.threshold)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "value": _jsonable(self.value),
            "threshold": _jsonable(self.threshold),
            "passed": self.passed,
            "primary": self.primary,
            "sample_size": self.sample_size,
            "n": self.n,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


def ks_critical(size: int, alpha: float = 0.05) -> float:
    """Asymptotic Kolmogorov critical value, about 1.36/sqrt(size) at 5%."""
    return float(stats.kstwobign.ppf(1 - alpha)) / math.sqrt(size)


def _require(size: int) -> None:
    if size < MIN_SAMPLES:
        raise InsufficientSamplesError(
            f"{size} samples is too few for a KS comparison; use at least {MIN_SAMPLES}"
        )


def _ks_continuous(samples: np.ndarray, cdf) -> float:
    x = np.sort(samples)
    m = x.size
    f = cdf(x)
    upper = np.arange(1, m + 1) / m - f
    lower = f - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


def _ks_lattice(samples: np.ndarray, cdf, step: float, correct: bool = False) -> float:
    """sup_k |F_m(k) - F(k)| over the lattice points k of the data.

    Left limits between lattice points are never compared, so the half-jump
    gap of the continuous statistic does not enter.  With ``correct`` the
    limit CDF is read at k + step/2 (continuity correction) instead.
    """
    x = np.sort(samples)
    uniq = np.unique(x)
    pts = [uniq, [uniq[0] - step]]
    gaps = np.diff(uniq)
    wide = gaps > 1.5 * step
    if wide.any():
        pts.append(uniq[1:][wide] - step)
    pts = np.concatenate(pts)
    ecdf = np.searchsorted(x, pts + step / 2, side="right") / x.size
    shift = step / 2 if correct else 0.0
    return float(np.max(np.abs(ecdf - cdf(pts + shift))))


def ks_distance(
    samples: np.ndarray, law: LimitLaw, lattice: float | None = None, continuity: bool = False
) -> float:
    samples = np.asarray(samples, dtype=float)
    if isinstance(law, Constant):
        below = np.count_nonzero(samples < law.value)
        above = np.count_nonzero(samples > law.value)
        return max(below, above) / samples.size
    if isinstance(law, Geometric):
        return _ks_lattice(samples, law.cdf, 1.0)
    if lattice is not None:
        return _ks_lattice(samples, law.cdf, lattice, continuity)
    return _ks_continuous(samples, law.cdf)


def _ks_histogram(hist: Histogram, cdf) -> tuple[float, int]:
    size = hist.total - hist.exact_zero
    cum = hist.underflow + np.concatenate(([0], np.cumsum(hist.counts)))
    return float(np.max(np.abs(cum / size - cdf(HIST_EDGES)))), size


def ks_against(
    law: LimitLaw,
    samples: np.ndarray | None = None,
    histogram: Histogram | None = None,
    branch: np.ndarray | None = None,
    lattice: float | None = None,
    n: int | None = None,
    alpha: float = 0.05,
    continuity: bool = False,
) -> list[TestReport]:
    """KS comparison of data with a limit law.

    For a normal-plus-atom mixture the atom is checked on its own (its
    empirical weight against ``atom_weight``, tolerance 3 binomial standard
    errors) and KS runs on the continuous part.  Atom membership is
    ``branch == 0`` when branch indicators are given, exact zero otherwise.
    ``lattice`` is the spacing of lattice-valued data; the statistic is then
    taken at lattice points only (``continuity`` adds the half-step
    correction).
    """
    if histogram is not None:
        if not isinstance(law, (Normal, MixtureNormalAtom)):
            raise ValueError("histogram KS supports normal and mixture laws")
        total = histogram.total
        _require(total)
        reports = []
        normal = law
        if isinstance(law, MixtureNormalAtom):
            reports.append(_atom_report(histogram.exact_zero / total, law.atom_weight, total, n))
            normal = law.normal
        d, size = _ks_histogram(histogram, normal.cdf)
        _require(size)
        reports.append(TestReport("ks-binned", "KS", d, ks_critical(size, alpha), size, n))
        return reports

    samples = np.asarray(samples, dtype=float)
    _require(samples.size)
    if isinstance(law, MixtureNormalAtom):
        in_atom = (np.asarray(branch) == 0) if branch is not None else (samples == 0)
        reports = [_atom_report(float(in_atom.mean()), law.atom_weight, samples.size, n)]
        cont = samples[~in_atom]
        _require(cont.size)
        d = ks_distance(cont, law.normal, lattice, continuity)
        reports.append(TestReport("ks-continuous-branch", "KS", d, ks_critical(cont.size, alpha), cont.size, n))
        return reports
    d = ks_distance(samples, law, lattice, continuity)
    return [TestReport("ks", "KS", d, ks_critical(samples.size, alpha), samples.size, n)]


def _atom_report(frac: float, weight: float, size: int, n) -> TestReport:
    tol = 3 * math.sqrt(weight * (1 - weight) / size)
    return TestReport("atom-weight", "atom-gap", abs(frac - weight), tol, size, n, details={"empirical": frac})


def mean_gap(
    values: np.ndarray, target: float, rel_tol: float = 0.05, se_mult: float = 3.0,
    n: int | None = None, name: str = "mean-gap",
) -> TestReport:
    """|mean - target| against max(se_mult * SE, rel_tol * |target|)."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.inf
    threshold = max(se_mult * se, rel_tol * abs(target))
    return TestReport(name, "mean-gap", abs(mean - target), threshold, values.size, n,
                      details={"mean": mean, "target": target, "stderr": se})


def variance_gap(
    values: np.ndarray, target: float, rel_tol: float = 0.05, se_mult: float = 3.0,
    n: int | None = None, name: str = "variance-gap",
) -> TestReport:
    """|sample variance - target| against max(se_mult * SE(var), rel_tol * target)."""
    values = np.asarray(values, dtype=float)
    var = float(values.var(ddof=1))
    dev = values - values.mean()
    # delta-method SE of the sample variance
    se = float(np.sqrt(np.var(dev * dev, ddof=1) / values.size))
    threshold = max(se_mult * se, rel_tol * abs(target))
    return TestReport(name, "variance-gap", abs(var - target), threshold, values.size, n,
                      details={"variance": var, "target": target, "stderr": se})


def chi_square_geometric(
    samples: np.ndarray, r: float, n: int, level: float = 0.99,
    mean_rel_tol: float = 0.05, min_expected: float = 5.0,
) -> list[TestReport]:
    """Chi-square of N*_n against Geometric(r), plus the gap of the mean to (1-r)/r."""
    if (1 - r) ** n >= 1e-6:
        raise ValueError(f"n={n} too small: truncation mass (1-r)^n = {(1 - r) ** n:.3g} >= 1e-6")
    samples = np.asarray(samples).astype(np.int64)
    size = samples.size
    if size == 0:
        raise InsufficientSamplesError("no samples")
    law = Geometric(r)
    k_max = 0
    while size * law.pmf(k_max + 1) >= min_expected:
        k_max += 1
    expected = list(size * law.pmf(np.arange(k_max + 1)))
    expected.append(size * (1 - r) ** (k_max + 1))  # pooled tail k > k_max
    observed = list(np.bincount(np.minimum(samples, k_max + 1), minlength=k_max + 2)[: k_max + 2])
    while len(expected) > 1 and expected[-1] < min_expected:
        expected[-2] += expected.pop()
        observed[-2] += observed.pop()
    expected = np.asarray(expected, dtype=float)
    observed = np.asarray(observed, dtype=float)
    chi = float(np.sum((observed - expected) ** 2 / expected))
    dof = max(1, expected.size - 1)
    reports = [
        TestReport("chi-square-geometric", "chi-square", chi, float(stats.chi2.ppf(level, dof)), size, n,
                   details={"dof": dof, "cells": int(expected.size),
                            "p_value": float(stats.chi2.sf(chi, dof))}),
        mean_gap(samples, law.mean, rel_tol=mean_rel_tol, n=n, name="geometric-mean"),
    ]
    return reports


def convergence_track(
    ns: Sequence[int], values: Sequence[float], target: float, rel_tol: float = 0.01,
    name: str = "convergence",
) -> TestReport:
    """Relative gap to ``target`` at the largest n, with a trend diagnostic.

    ``details["decreasing_fraction"]`` is the share of successive checkpoints
    where |value - target| shrinks.
    """
    if len(ns) < 4:
        raise ValueError("convergence_track needs at least 4 checkpoints")
    values = np.asarray(values, dtype=float)
    gaps = np.abs(values - target)
    scale = abs(target) if target != 0 else 1.0
    dec = float(np.mean(np.diff(gaps) <= 0))
    return TestReport(
        name, "relative-gap", float(gaps[-1] / scale), rel_tol, 0, int(ns[-1]),
        details={"ns": list(ns), "values": values.tolist(), "target": target, "decreasing_fraction": dec},
    )


def martingale_tail_check(
    nonzeros: np.ndarray, checkpoints: Sequence[int], r: float, scaler_r: float | None = None,
    early: tuple[int, int] | None = None, late: tuple[int, int] | None = None,
) -> list[TestReport]:
    """Checks on M*_n = alpha*_n N*_n from per-path checkpoint values.

    1. The ensemble mean of M*_n is 1 - r within 3 standard errors at every
       checkpoint (worst z-score reported).
    2. median |M*_{2n} - M*_n| over paths not absorbed at zero at the ``late`` doubling pair is below that at
       the ``early`` pair (defaults: first and last doubling pairs in the top
       half of the grid).
    """
    ck = [int(c) for c in checkpoints]
    alpha = np.asarray(full_alpha(np.asarray(ck), r if scaler_r is None else scaler_r))
    m = nonzeros * alpha[None, :]
    size = m.shape[0]
    means = m.mean(axis=0)
    ses = m.std(axis=0, ddof=1) / math.sqrt(size)
    z = np.abs(means - (1 - r)) / np.where(ses > 0, ses, np.inf)
    reports = [TestReport("martingale-mean", "max-z", float(z.max()), 3.0, size, ck[-1],
                          details={"means": means.tolist()})]
    pos = {c: i for i, c in enumerate(ck)}
    pairs = [(c, 2 * c) for c in ck[len(ck) // 2:] if 2 * c in pos]
    if early is None or late is None:
        if len(pairs) < 2:
            raise ValueError("need at least two doubling pairs in the top half of the grid")
        early = early or pairs[0]
        late = late or pairs[-1]

    # absorbed paths (N* = 0 throughout) have no fluctuation at all; leave them out
    active = nonzeros[:, -1] > 0

    def med(pair):
        a, b = pair
        return float(np.median(np.abs(m[active, pos[b]] - m[active, pos[a]])))

    e, l_ = med(early), med(late)
    ratio = l_ / e if e > 0 else math.inf
    reports.append(TestReport("martingale-tail", "median-ratio", ratio, 1.0, size, late[1],
                              details={"early_pair": list(early), "late_pair": list(late),
                                       "early_median": e, "late_median": l_,
                                       "active_paths": int(active.sum())}))
    return reports
