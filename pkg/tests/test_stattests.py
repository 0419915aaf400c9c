import numpy as np
import pytest

from erwdelay import FULL, ProbTriple
from erwdelay.montecarlo import EnsembleSpec, Histogram, run_ensemble
from erwdelay.stattests import (
    Constant,
    Geometric,
    InsufficientSamplesError,
    MixtureNormalAtom,
    Normal,
    TestReport,
    chi_square_geometric,
    convergence_track,
    ks_against,
    ks_critical,
    ks_distance,
    martingale_tail_check,
    mean_gap,
    variance_gap,
)


def pass_rate(make_reports, reps=100, seed=0):
    rng = np.random.default_rng(seed)
    return sum(all(r.passed for r in make_reports(rng)) for _ in range(reps)) / reps


def test_report_pass_flag():
    assert TestReport("x", "KS", 0.1, 0.1).passed
    assert not TestReport("x", "KS", 0.11, 0.1).passed
    d = TestReport("x", "KS", 0.1, 0.2, 10, 4, details={"a": np.float64(1.5)}).to_dict()
    assert d["passed"] and d["details"]["a"] == 1.5


def test_ks_critical_value():
    assert ks_critical(10**4) == pytest.approx(1.36 / 100, rel=0.01)


def test_ks_self_calibration_normal():
    law = Normal(0.0, 0.25)
    assert pass_rate(lambda g: ks_against(law, law.sample(g, 100_000))) >= 0.9


def test_ks_self_calibration_mixture():
    law = MixtureNormalAtom(0.25, 0.5)
    assert pass_rate(lambda g: ks_against(law, law.sample(g, 20_000))) >= 0.9


def test_mixture_report_has_two_parts():
    law = MixtureNormalAtom(0.25, 0.3)
    reps = ks_against(law, law.sample(np.random.default_rng(1), 10_000))
    assert [r.name for r in reps] == ["atom-weight", "ks-continuous-branch"]
    assert reps[0].threshold == pytest.approx(3 * np.sqrt(0.3 * 0.7 / 10_000))


def test_mixture_from_histogram():
    law = MixtureNormalAtom(1.0, 0.5)
    values = law.sample(np.random.default_rng(2), 50_000)
    reps = ks_against(law, histogram=Histogram.from_values(values))
    assert all(r.passed for r in reps)
    # a mis-specified variance is caught
    wrong = ks_against(MixtureNormalAtom(2.0, 0.5), histogram=Histogram.from_values(values))
    assert not wrong[1].passed


def test_constant_law():
    rep = ks_against(Constant(2.0), np.full(2000, 2.0))[0]
    assert rep.value == 0 and rep.passed


def test_refuses_small_samples():
    with pytest.raises(InsufficientSamplesError):
        ks_against(Normal(0, 1), np.zeros(999))


def test_lattice_mode_on_discretized_normal():
    h = 0.01
    law = Normal(0.0, 0.25)
    z = law.sample(np.random.default_rng(3), 200_000)
    up = np.ceil(z / h) * h  # P(X <= k) = F(k) at lattice points
    near = np.round(z / h) * h  # P(X <= k) = F(k + h/2)
    crit = ks_critical(z.size)
    # the continuous statistic sees half a lattice jump, about 0.5 * 0.8 * h
    assert ks_distance(up, law) > crit
    assert ks_distance(up, law, lattice=h) < crit
    assert ks_distance(near, law, lattice=h, continuity=True) < crit
    assert ks_distance(near, law, lattice=h) > ks_distance(near, law, lattice=h, continuity=True)


def test_geometric_self_calibration():
    law = Geometric(0.3)
    assert pass_rate(lambda g: chi_square_geometric(law.sample(g, 100_000), 0.3, 64)) >= 0.9


def test_geometric_negative_control_and_precondition():
    assert not chi_square_geometric(np.zeros(100_000, dtype=int), 0.3, 64)[0].passed
    with pytest.raises(ValueError):
        chi_square_geometric(np.zeros(10, dtype=int), 0.5, 10)


def test_geometric_second_moment_formula():
    z = Geometric(0.4).sample(np.random.default_rng(4), 200_000)
    assert np.mean(z.astype(float) ** 2) == pytest.approx(Geometric(0.4).second_moment, rel=0.05)


def test_mean_and_variance_gap_calibration():
    law = Normal(1.0, 4.0)
    assert pass_rate(lambda g: [mean_gap(law.sample(g, 1000), 1.0, rel_tol=0.0)]) >= 0.9
    assert pass_rate(lambda g: [variance_gap(law.sample(g, 1000), 4.0, rel_tol=0.0)]) >= 0.9


def test_convergence_track():
    ns = [16, 32, 64, 128]
    vals = [0.9, 0.95, 0.98, 1.0]
    rep = convergence_track(ns, vals, target=1.0)
    assert rep.value == 0 and rep.passed
    assert rep.details["decreasing_fraction"] == 1.0
    with pytest.raises(ValueError):
        convergence_track(ns[:3], vals[:3], 1.0)


@pytest.fixture(scope="module")
def full_paths():
    spec = EnsembleSpec(FULL, ProbTriple.symmetric(0.5), 8192, 20_000, 21,
                        checkpoints=tuple(2**k for k in range(14)), keep_samples=True)
    return run_ensemble(spec)


def test_martingale_tail(full_paths):
    reps = martingale_tail_check(full_paths.samples.nonzeros, full_paths.checkpoints, 0.5,
                                 early=(256, 512), late=(4096, 8192))
    assert all(r.passed for r in reps)
    again = martingale_tail_check(full_paths.samples.nonzeros, full_paths.checkpoints, 0.5,
                                  early=(256, 512), late=(4096, 8192))
    assert [r.to_dict() for r in again] == [r.to_dict() for r in reps]


def test_martingale_wrong_scaler_fails(full_paths):
    reps = martingale_tail_check(full_paths.samples.nonzeros, full_paths.checkpoints, 0.5, scaler_r=0.45)
    assert not reps[0].passed
