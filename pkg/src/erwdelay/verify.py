"""Verification suites: every acceptance check plus informational diagnostics.

Checks whose ``report.primary`` is set are acceptance criteria and decide a
verify run's exit code; the rest are reported for context only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import (
    bracket_expectation,
    full_mean,
    full_moment_table,
    gamma_ratio_asymptotic,
    gamma_ratio_exact,
    limit_constants,
    mixed_kernel_moments,
)
from .montecarlo import EnsembleSpec, run_ensemble
from .oracle import correlation, exact_distribution, exact_moment, martingale_check
from .pmf import Pmf
from .stattests import (
    MixtureNormalAtom,
    TestReport,
    chi_square_geometric,
    convergence_track,
    ks_against,
    martingale_tail_check,
    mean_gap,
    variance_gap,
)
from .walk import FIRST_AND_LAST, FIRST_ONLY, FULL, LAST_ONLY, MemoryKernel, ProbTriple, last_window

SCHEMA_VERSION = "erwdelay.verify/1"


@dataclass
class Check:
    """A TestReport tagged with where it applies."""

    criterion: str | None  # acceptance criterion number, None if informational
    kernel: str
    r: float | None
    branch: str
    report: TestReport

    @property
    def primary(self) -> bool:
        return self.report.primary

    @property
    def passed(self) -> bool:
        return self.report.passed

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "kernel": self.kernel, "r": self.r,
                "branch": self.branch, **self.report.to_dict()}


@dataclass
class VerifyResult:
    theorem: str
    seed: int
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.primary)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "theorem": self.theorem,
            "seed": self.seed,
            "all_primary_passed": self.ok,
            "checks": [c.to_dict() for c in self.checks],
            "notes": list(self.notes),
        }

    def to_rows(self) -> list[tuple]:
        """Tidy rows: three per check (value, threshold, passed)."""
        rows = []
        for c in self.checks:
            tag = f"C{c.criterion}" if c.criterion else "info"
            stat = f"{tag}.{c.report.name}.{c.report.statistic}"
            n = "" if c.report.n is None else c.report.n
            se = c.report.details.get("stderr", "")
            rows.append((c.kernel, "" if c.r is None else c.r, n, c.branch, f"{stat}.value", c.report.value, se))
            rows.append((c.kernel, "" if c.r is None else c.r, n, c.branch, f"{stat}.threshold", c.report.threshold, ""))
            rows.append((c.kernel, "" if c.r is None else c.r, n, c.branch, f"{stat}.passed", int(c.passed), ""))
        return rows


@dataclass(frozen=True)
class SuiteOptions:
    seed: int
    r: float | None = None  # overrides the criterion's r values
    reps: int | None = None  # overrides the criterion's replicate counts
    workers: int | None = None


def _rs(opts: SuiteOptions, default):
    return [opts.r] if opts.r is not None else list(default)


def _r1(opts: SuiteOptions, default: float) -> float:
    return default if opts.r is None else opts.r


def _reps(opts: SuiteOptions, default: int) -> int:
    return default if opts.reps is None else opts.reps


def _ensemble(opts, kernel, r, n, reps, checkpoints=None):
    spec = EnsembleSpec(kernel, ProbTriple.symmetric(r), n, reps, opts.seed,
                        checkpoints=checkpoints, keep_samples=True)
    return run_ensemble(spec, opts.workers)


def _rel(name, value, target, tol, n=None, statistic="relative-gap", **details) -> TestReport:
    scale = abs(target) if target != 0 else 1.0
    return TestReport(name, statistic, abs(value - target) / scale, tol, 0, n,
                      details={"value": value, "target": target, **details})


def _abs(name, value, target, tol, n=None, statistic="abs-gap", **details) -> TestReport:
    return TestReport(name, statistic, abs(value - target), tol, 0, n,
                      details={"value": value, "target": target, **details})


def _info(report: TestReport) -> TestReport:
    return replace(report, primary=False)


# --- criteria ----------------------------------------------------------------


def criterion_1(opts: SuiteOptions) -> list[Check]:
    out = []
    for r in _rs(opts, (0.2, 0.5, 0.8)):
        table = full_moment_table(14, r)
        worst_mean = worst_second = 0.0
        for n in range(1, 15):
            law = exact_distribution(FULL, n, r)
            worst_mean = max(worst_mean, abs(float(law.mean()) - float(full_mean(n, r))))
            worst_second = max(worst_second, abs(float(law.moment(2)) - table.second[n - 1]))
        out.append(Check("1", "full", r, "all",
                         TestReport("oracle-mean-vs-gamma", "max-abs-gap", worst_mean, 1e-12, 0, 14)))
        out.append(Check("1", "full", r, "all",
                         TestReport("oracle-second-vs-recursion", "max-abs-gap", worst_second, 1e-12, 0, 14)))
    return out


def criterion_2(opts: SuiteOptions) -> list[Check]:
    out = []
    for r in _rs(opts, (0.2, 0.5, 0.8)):
        out.append(Check("2", "full", r, "all",
                         TestReport("martingale-exactness", "max-deviation", martingale_check(12, r), 1e-12, 0, 12)))
    r = _r1(opts, 0.5)
    b5, b6 = bracket_expectation(10**5, r), bracket_expectation(10**6, r)
    out.append(Check("2", "full", r, "all",
                     _rel("bracket-bounded", b6, b5, 1e-3, 10**6, value_1e5=b5)))
    return out


def criterion_3(opts: SuiteOptions) -> list[Check]:
    r = _r1(opts, 0.5)
    n = 4096
    lc = limit_constants(r)
    grid = tuple(2**k for k in range(14))  # 1 .. 8192; same paths as a run to 4096
    summary = _ensemble(opts, FULL, r, 8192, _reps(opts, 200_000), grid)
    m = summary.moments("scaled", n)
    exact = float(full_mean(n, r)) / n ** (1 - r)
    out = [
        Check("3", "full", r, "all", _rel("mean-vs-limit", m.mean, lc.mean_limit, 0.015, n, stderr=m.stderr)),
        Check("3", "full", r, "all", mean_gap_from_moments("mean-vs-exact", m, exact, n)),
    ]
    ns = [c for c in summary.checkpoints if c >= 16]
    track = convergence_track(ns, [summary.moments("scaled", c).mean for c in ns], lc.mean_limit,
                              rel_tol=0.01, name="mean-track")
    out.append(Check(None, "full", r, "all", _info(track)))
    for rep in martingale_tail_check(summary.samples.nonzeros, summary.checkpoints, r,
                                     early=(256, 512), late=(4096, 8192)):
        out.append(Check(None, "full", r, "all", _info(rep)))
    return out


def mean_gap_from_moments(name, m, target, n) -> TestReport:
    return TestReport(name, "mean-gap", abs(m.mean - target), 3 * m.stderr, m.count, n,
                      details={"mean": m.mean, "target": target, "stderr": m.stderr})


def criterion_4(opts: SuiteOptions) -> list[Check]:
    r = _r1(opts, 0.5)
    n = 10_000
    lc = limit_constants(r)
    summary = _ensemble(opts, FIRST_ONLY, r, n, _reps(opts, 100_000), (n,))
    nz = summary.samples.nonzeros[:, 0].astype(float)
    first = summary.samples.first
    centered = (nz - n * (1 - r) * first) / math.sqrt(n)
    atom_frac = float(np.mean(centered == 0))
    law = MixtureNormalAtom(r * (1 - r), r)
    ks = ks_against(law, centered, branch=first, lattice=1 / math.sqrt(n), n=n)[1]
    out = [
        Check("4", "first", r, "all", _abs("atom-weight", atom_frac, r, 0.01, n, statistic="atom-gap")),
        Check("4", "first", r, "first_nonzero", ks),
        Check("4", "first", r, "all", _rel("mean-rate", float(np.mean(nz / n)), lc.first_only_rate, 0.01, n)),
    ]
    branch = nz[first == 1] / n
    out.append(Check(None, "first", r, "first_nonzero",
                     _info(_rel("branch-rate", float(branch.mean()), lc.first_only_branch_rate, 0.01, n))))
    out.append(Check(None, "first", r, "first_nonzero",
                     _info(variance_gap(centered[first == 1], lc.first_only_branch_variance, n=n,
                                        name="branch-variance"))))
    return out


def criterion_5(opts: SuiteOptions) -> list[Check]:
    out = []
    for r in _rs(opts, (0.3, 0.5)):
        n = 64
        summary = _ensemble(opts, LAST_ONLY, r, n, _reps(opts, 100_000), (12, n))
        final = summary.samples.nonzeros[:, 1]
        chi, _ = chi_square_geometric(final, r, n, level=0.99)
        lc = limit_constants(r)
        out.append(Check("5", "last", r, "all", chi))
        out.append(Check("5", "last", r, "all",
                         mean_gap(final, lc.last_geometric_mean, rel_tol=0.02, se_mult=0.0, n=n,
                                  name="geometric-mean")))
        at12 = summary.samples.nonzeros[:, 0]
        counts = np.bincount(at12, minlength=13)
        emp = Pmf.from_mapping({k: c / at12.size for k, c in enumerate(counts)})
        tv = emp.tv_distance(exact_distribution(LAST_ONLY, 12, r).to_float())
        out.append(Check("5", "last", r, "all", TestReport("tv-vs-oracle", "TV", tv, 5e-3, at12.size, 12)))
        second = float(np.mean(final.astype(float) ** 2))
        out.append(Check(None, "last", r, "all",
                         _info(_rel("geometric-second-moment", second, lc.last_geometric_second_moment, 0.05, n))))
    return out


def criterion_6(opts: SuiteOptions) -> list[Check]:
    r = _r1(opts, 0.5)
    n = 10_000
    lc = limit_constants(r)
    summary = _ensemble(opts, FIRST_AND_LAST, r, n, _reps(opts, 100_000), (n,))
    first = summary.samples.first
    branch = summary.samples.nonzeros[first == 1, 0].astype(float)
    var_n = float(branch.var(ddof=1)) / n
    out = [
        Check("6", "first-last", r, "first_nonzero",
              _rel("branch-variance-rate", var_n, lc.sigma_star_sq, 0.05, n)),
        Check("6", "first-last", r, "first_nonzero",
              _rel("branch-mean-rate", float(branch.mean()) / n, lc.first_last_branch_rate, 0.01, n)),
    ]
    # exact recursion against the oracle, n <= 14, on branch I*_1 = 1
    worst = 0.0
    for k in range(1, 15):
        row = mixed_kernel_moments(k, r)
        m1 = float(exact_moment(FIRST_AND_LAST, k, r, 1, condition_on_first_nonzero=True))
        m2 = float(exact_moment(FIRST_AND_LAST, k, r, 2, condition_on_first_nonzero=True))
        worst = max(worst, abs(row.e_count - m1), abs(row.e_count_sq - m2))
    out.append(Check("6", "first-last", r, "first_nonzero",
                     TestReport("recursion-vs-oracle", "max-abs-gap", worst, 1e-12, 0, 14)))
    big = 10**5
    row = mixed_kernel_moments(big, r)
    offset = row.e_count - big * lc.first_last_branch_rate
    out.append(Check("6", "first-last", r, "first_nonzero",
                     _abs("mean-offset", offset, lc.first_last_mean_offset, 1e-3, big)))
    out.append(Check(None, "first-last", r, "first_nonzero",
                     _info(_rel("exact-variance-rate-vs-chain", row.variance / big,
                                lc.first_last_chain_variance, 1e-3, big))))
    out.append(Check(None, "first-last", r, "first_nonzero",
                     _info(_rel("mc-variance-rate-vs-chain", var_n, lc.first_last_chain_variance, 0.05, n))))
    rate = summary.samples.nonzeros[:, 0].astype(float) / n
    out.append(Check(None, "first-last", r, "all",
                     _info(_rel("unconditional-mean-rate", float(rate.mean()), lc.first_last_rate, 0.01, n))))
    return out


GAMMA_XS = (0.3, -0.3, 0.5, -0.5)


def gamma_errors(x: float, ks=range(8, 17)) -> tuple[np.ndarray, np.ndarray]:
    ns = np.array([2.0**k for k in ks])
    err = np.array([abs(gamma_ratio_exact(n, x) - gamma_ratio_asymptotic(n, x)) for n in ns])
    return ns, err


def criterion_7(opts: SuiteOptions) -> list[Check]:
    out = []
    for x in GAMMA_XS:
        ns, err = gamma_errors(x)
        lit = ns**2 * err
        drift = float(np.max(np.abs(lit[1:] / lit[:-1] - 1)))
        out.append(Check("7", "-", None, "all",
                         TestReport(f"gamma-n2-stability[x={x}]", "max-doubling-drift", drift, 0.2, 0,
                                    int(ns[-1]), details={"n2_err": lit.tolist()})))
        scaled = ns ** (2 - x) * err
        drift2 = float(np.max(np.abs(scaled[1:] / scaled[:-1] - 1)))
        out.append(Check(None, "-", None, "all",
                         _info(TestReport(f"gamma-n(2-x)-stability[x={x}]", "max-doubling-drift", drift2, 0.2,
                                          0, int(ns[-1])))))
    return out


def criterion_8(opts: SuiteOptions) -> list[Check]:
    r = _r1(opts, 0.3)
    n = 2048
    summary = _ensemble(opts, last_window(3), r, n, _reps(opts, 10_000), (512, n))
    nz = summary.samples.nonzeros
    frac = float(np.mean(nz[:, 1] > nz[:, 0]))
    return [Check("8", "window:3", r, "all",
                  TestReport("late-activity", "fraction", frac, 1e-3, nz.shape[0], n))]


def correlation_remark(opts: SuiteOptions) -> list[Check]:
    r = _r1(opts, 0.5)
    out = []
    c_last = correlation(LAST_ONLY, 20, r)
    out.append(Check(None, "last", r, "all",
                     _info(TestReport("last-correlation-floor", "negated-correlation", -c_last, -0.1, 0, 20,
                                      details={"correlation": c_last}))))
    c8, c16 = correlation(FULL, 8, r), correlation(FULL, 16, r)
    ratio = c8 / c16
    out.append(Check(None, "full", r, "all",
                     _info(_rel("full-correlation-decay", ratio, 2.0**r, 0.3, 16, c8=c8, c16=c16))))
    return out


def criterion_9(opts: SuiteOptions) -> tuple[list[Check], list[str]]:
    r = _r1(opts, 0.5)
    n = 10**6
    lc = limit_constants(r)
    table = full_moment_table(n, r)
    var_scaled = float(table.variance[-1]) / n ** (2 * (1 - r))
    out = [Check("9", "full", r, "all", _rel("variance-limit", var_scaled, lc.var_limit, 0.01, n))]
    var_m = float(table.alpha[-1] ** 2 * table.variance[-1])
    gap_moments = abs(var_m - lc.var_y_moments)
    gap_remark = abs(var_m - lc.var_y_remark)
    verdict = "moments" if gap_moments < gap_remark else "remark"
    out.append(Check(None, "full", r, "all",
                     _info(_rel("var-y-moments-form", var_m, lc.var_y_moments, 0.01, n,
                                var_y_remark=lc.var_y_remark, consistent=verdict))))
    notes = [
        f"Var(Y) at r={r}: Var(M*_n) at n=1e6 is {var_m:.6g}; "
        f"(1-r)^2(Gamma(1-r)^2 d_r - 1) = {lc.var_y_moments:.6g}; "
        f"(1-r)^2(d_r/Gamma(1-r)^2 - 1) = {lc.var_y_remark:.6g}; "
        f"consistent form: {'Gamma(1-r)^2 d_r - 1' if verdict == 'moments' else 'd_r/Gamma(1-r)^2 - 1'}"
    ]
    return out, notes


def suite_3_1(opts):
    checks = criterion_1(opts) + criterion_2(opts) + criterion_3(opts)
    more, notes = criterion_9(opts)
    return checks + more, notes


SUITES = {
    "3.1": suite_3_1,
    "4.1": lambda o: (criterion_4(o), []),
    "5.1": lambda o: (criterion_5(o), []),
    "6.1": lambda o: (criterion_6(o), []),
    "7": lambda o: (criterion_8(o) + correlation_remark(o), []),
    "gamma": lambda o: (criterion_7(o), []),
}
SUITE_ORDER = ("3.1", "4.1", "5.1", "6.1", "7", "gamma")


def run_verify(theorem: str, opts: SuiteOptions) -> VerifyResult:
    """Run one suite (or ``"all"``) and collect its checks."""
    names = SUITE_ORDER if theorem == "all" else (theorem,)
    result = VerifyResult(theorem, opts.seed)
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITE_ORDER)} or all")
        checks, notes = SUITES[name](opts)
        result.checks.extend(checks)
        result.notes.extend(notes)
    return result


def format_table(result: VerifyResult) -> str:
    lines = [f"{'crit':<5} {'kernel':<11} {'r':<5} {'check':<40} {'value':>12} {'threshold':>12}  result"]
    for c in result.checks:
        crit = c.criterion or "-"
        status = ("PASS" if c.passed else "FAIL") if c.primary else ("ok" if c.passed else "off") + " (info)"
        r = "" if c.r is None else f"{c.r:g}"
        lines.append(f"{crit:<5} {c.kernel:<11} {r:<5} {c.report.name:<40} "
                     f"{c.report.value:>12.5g} {c.report.threshold:>12.5g}  {status}")
    lines.extend(f"note: {s}" for s in result.notes)
    return "\n".join(lines)
