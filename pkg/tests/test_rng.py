import numpy as np
from scipy import stats

from erwdelay.rng import GOLDEN, StepStream, master_key, mix64, replicate_base, uniform_at


def test_mix64_matches_splitmix64_reference():
    # first output of SplitMix64 seeded with 0
    assert mix64(GOLDEN) == 0xE220A8397B1DCDAF


def test_stream_is_a_pure_function_of_seed_replicate_step():
    a, b = StepStream(5, 3), StepStream(5, 3)
    xs = [a.random() for _ in range(10)]
    assert xs == [b.uniform(t) for t in range(10)]
    assert xs != [StepStream(5, 4).uniform(t) for t in range(10)]
    assert xs != [StepStream(6, 3).uniform(t) for t in range(10)]


def test_uniforms_in_unit_interval_and_uniform_in_law():
    base = replicate_base(master_key(1), 0)
    u = np.array([uniform_at(base, t) for t in range(50_000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    counts = np.histogram(u, bins=20, range=(0, 1))[0]
    assert stats.chisquare(counts).pvalue > 1e-4
    # neighbouring counters should be uncorrelated
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.02
