"""Counter-based uniform streams keyed by (master seed, replicate, step).

Each uniform is ``mix64(base_k + (t + 1) * GOLDEN)`` where ``base_k`` is a
hash of the master key and the replicate index, i.e. a SplitMix64 stream per
replicate.  Because the draw for step ``t`` is a pure function of its
coordinates, replicate ``k`` reproduces bit-for-bit no matter how replicates
are batched or scheduled across workers.

The pure-Python functions and the numba versions in :mod:`erwdelay._engine`
must stay arithmetically identical; ``tests/test_rng.py`` pins them together.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def master_key(seed: int) -> int:
    """64-bit key for a master seed (numpy SeedSequence hashing)."""
    return int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint64)[0])


def replicate_base(key: int, replicate: int) -> int:
    return mix64(key + (replicate + 1) * GOLDEN)


def uniform_at(base: int, t: int) -> float:
    """Uniform in [0, 1) for counter ``t`` of the stream rooted at ``base``."""
    return (mix64(base + (t + 1) * GOLDEN) >> 11) * INV_2_53


class StepStream:
    """Random source for one replicate; ``random()`` walks the counter."""

    def __init__(self, seed: int, replicate: int = 0):
        self.seed = seed
        self.replicate = replicate
        self.base = replicate_base(master_key(seed), replicate)
        self.counter = 0

    def uniform(self, t: int) -> float:
        return uniform_at(self.base, t)

    def random(self) -> float:
        u = uniform_at(self.base, self.counter)
        self.counter += 1
        return u
