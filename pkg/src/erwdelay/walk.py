"""Elephant random walk with delays: kernels, sufficient statistics, paths.

The next step copies a uniformly chosen remembered step ``X_K``: ``+X_K``
with probability p, ``-X_K`` with probability q, and 0 with probability r.
Which past indices are remembered is set by a :class:`MemoryKernel`.  Every
kernel's next-step law depends on the memory only through
``(c, sigma, M)``: the number of nonzero remembered steps, their signed
sum, and the memory size.  :class:`WalkState` carries exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import _engine
from .pmf import Pmf
from .rng import StepStream, master_key

STEP_VALUES = (-1, 0, 1)


class ModelIntegrityError(ValueError):
    """A walk state whose memory statistic cannot occur under its kernel."""


@dataclass(frozen=True)
class ProbTriple:
    p: float
    q: float
    r: float

    def __post_init__(self):
        for name in ("p", "q", "r"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name}={v!r} must lie strictly between 0 and 1")
        if abs(self.p + self.q + self.r - 1) > 1e-12:
            raise ValueError(
                f"probabilities must sum to 1 (p+q+r={float(self.p + self.q + self.r)!r})"
            )

    @classmethod
    def symmetric(cls, r) -> "ProbTriple":
        """p = q = (1 - r)/2."""
        half = (1 - r) / 2
        return cls(half, half, r)


_KIND_NAMES = {
    "full": _engine.FULL,
    "first": _engine.FIRST,
    "last": _engine.LAST,
    "first-last": _engine.FIRST_LAST,
    "window": _engine.WINDOW,
}
_ALIASES = {
    "first_only": "first",
    "firstonly": "first",
    "last_only": "last",
    "lastonly": "last",
    "first_last": "first-last",
    "firstandlast": "first-last",
    "first+last": "first-last",
    "lastwindow": "window",
    "last-window": "window",
}


@dataclass(frozen=True)
class MemoryKernel:
    """Which past indices the walker remembers after n steps.

    ``full`` {1..n}, ``first`` {1}, ``last`` {n}, ``first-last`` {1, n},
    ``window`` the last ``m`` indices.
    """

    kind: str
    m: int = 0

    def __post_init__(self):
        if self.kind not in _KIND_NAMES:
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "window":
            if int(self.m) != self.m or self.m < 1:
                raise ValueError("LastWindow requires m >= 1")
        elif self.m != 0:
            raise ValueError(f"kernel {self.kind!r} takes no window length")

    @classmethod
    def parse(cls, text: str) -> "MemoryKernel":
        """Parse ``full``, ``first``, ``last``, ``first-last``, ``window:M``."""
        name, _, arg = text.strip().lower().partition(":")
        name = _ALIASES.get(name, name)
        if name == "window":
            if not arg:
                raise ValueError("window kernel needs a length, e.g. window:3")
            try:
                m = int(arg)
            except ValueError:
                raise ValueError(f"bad window length {arg!r}") from None
            return cls("window", m)
        if arg:
            raise ValueError(f"kernel {name!r} takes no argument")
        return cls(name)

    @property
    def code(self) -> int:
        return _KIND_NAMES[self.kind]

    @property
    def label(self) -> str:
        return f"window:{self.m}" if self.kind == "window" else self.kind

    def memory_indices(self, n: int) -> list[int]:
        """1-based indices remembered after ``n >= 1`` steps."""
        if self.kind == "full":
            return list(range(1, n + 1))
        if self.kind == "first":
            return [1]
        if self.kind == "last":
            return [n]
        if self.kind == "first-last":
            return sorted({1, n})
        return list(range(max(1, n - self.m + 1), n + 1))

    def __str__(self):
        return self.label


FULL = MemoryKernel("full")
FIRST_ONLY = MemoryKernel("first")
LAST_ONLY = MemoryKernel("last")
FIRST_AND_LAST = MemoryKernel("first-last")


def last_window(m: int) -> MemoryKernel:
    return MemoryKernel("window", m)


@dataclass(frozen=True)
class WalkState:
    """Walk after ``n`` steps.

    ``memory`` is the kernel's sufficient statistic: ``(nonzeros, position)``
    for full memory, ``(X_1,)``, ``(X_n,)``, ``(X_1, X_n)``, or the last
    ``min(n, m)`` steps oldest first for a window.
    """

    n: int = 0
    position: int = 0
    zeros: int = 0
    nonzeros: int = 0
    memory: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.zeros + self.nonzeros != self.n:
            raise ModelIntegrityError("zeros + nonzeros must equal n")
        if abs(self.position) > self.nonzeros:
            raise ModelIntegrityError("|position| exceeds the number of nonzero steps")


def memory_summary(state: WalkState, kernel: MemoryKernel) -> tuple[int, int, int]:
    """(c, sigma, M): nonzero count, signed sum and size of the memory."""
    if state.n < 1:
        raise ModelIntegrityError("memory is empty before the first step")
    mem = state.memory
    if kernel.kind == "full":
        if len(mem) != 2:
            raise ModelIntegrityError("full memory statistic is (nonzeros, position)")
        c, sigma = mem
        if (c, sigma) != (state.nonzeros, state.position):
            raise ModelIntegrityError("full memory statistic disagrees with the counters")
        size = state.n
    else:
        if kernel.kind == "window":
            expected = min(state.n, kernel.m)
        elif kernel.kind == "first-last":
            expected = 2
        else:
            expected = 1
        if len(mem) != expected or any(x not in STEP_VALUES for x in mem):
            raise ModelIntegrityError(f"bad memory statistic {mem!r} for kernel {kernel}")
        if kernel.kind == "first-last" and state.n == 1:
            # {1, n} collapses to {1}
            mem = mem[:1]
        c = sum(1 for x in mem if x != 0)
        sigma = sum(mem)
        size = len(mem)
    if c > size or abs(sigma) > c or (c + sigma) % 2:
        raise ModelIntegrityError(f"inconsistent memory statistic c={c}, sigma={sigma}, M={size}")
    return c, sigma, size


def _sign_probs(c, sigma, size, p, q):
    # keep in step with _engine.simulate_block
    pplus = p * (c + sigma) / (2 * size) + q * (c - sigma) / (2 * size)
    pminus = q * (c + sigma) / (2 * size) + p * (c - sigma) / (2 * size)
    return pplus, pminus


def step_distribution(state: WalkState, kernel: MemoryKernel, params: ProbTriple) -> Pmf:
    """Law of the next step given the current sufficient statistic."""
    c, sigma, size = memory_summary(state, kernel)
    p, q, r = params.p, params.q, params.r
    if any(isinstance(v, Fraction) for v in (p, q, r)):
        pplus = Fraction(p) * (c + sigma) / (2 * size) + Fraction(q) * (c - sigma) / (2 * size)
        pminus = Fraction(q) * (c + sigma) / (2 * size) + Fraction(p) * (c - sigma) / (2 * size)
        pzero = Fraction(size - c, size) + Fraction(c, size) * r
    else:
        pplus, pminus = _sign_probs(c, sigma, size, p, q)
        pzero = (size - c) / size + c / size * r
    return Pmf((-1, 0, 1), (pminus, pzero, pplus))


def sample_step(pplus, pminus, u: float) -> int:
    if u < pplus:
        return 1
    if u < pplus + pminus:
        return -1
    return 0


def first_step(params: ProbTriple, rng) -> int:
    """Draw X_1: +1, -1, 0 with probabilities p, q, r.

    ``rng`` is anything with a ``random()`` method returning a uniform in
    [0, 1), e.g. :class:`~erwdelay.rng.StepStream` or ``numpy.random.Generator``.
    """
    return sample_step(params.p, params.q, rng.random())


def advance(state: WalkState, step: int, kernel: MemoryKernel) -> WalkState:
    if step not in STEP_VALUES:
        raise ValueError(f"step must be one of {STEP_VALUES}, got {step!r}")
    n = state.n + 1
    position = state.position + step
    zeros = state.zeros + (step == 0)
    nonzeros = state.nonzeros + (step != 0)
    kind = kernel.kind
    if kind == "full":
        memory = (nonzeros, position)
    elif kind == "first":
        memory = state.memory if state.n else (step,)
    elif kind == "last":
        memory = (step,)
    elif kind == "first-last":
        memory = (state.memory[0], step) if state.n else (step, step)
    else:
        memory = (state.memory + (step,))[-kernel.m:]
    return WalkState(n, position, zeros, nonzeros, memory)


def iter_path(
    kernel: MemoryKernel, params: ProbTriple, n: int, seed: int, replicate: int = 0
) -> Iterator[WalkState]:
    """Reference path built from ``first_step``/``step_distribution``/``advance``.

    Step ``t`` consumes the uniform at counter ``t - 1`` of the replicate's
    stream, so this reproduces the compiled engine draw for draw.
    """
    stream = StepStream(seed, replicate)
    state = advance(WalkState(), first_step(params, stream), kernel)
    yield state
    for t in range(1, n):
        pmf = step_distribution(state, kernel, params).as_dict()
        state = advance(state, sample_step(pmf[1], pmf[-1], stream.uniform(t)), kernel)
        yield state


def geometric_grid(n: int, base: int = 2) -> np.ndarray:
    """Powers of ``base`` up to ``n``, always including ``n``."""
    if n < 1:
        raise ValueError("horizon must be >= 1")
    pts = []
    k = 1
    while k < n:
        pts.append(k)
        k *= base
    pts.append(n)
    return np.asarray(pts, dtype=np.int64)


def normalize_checkpoints(checkpoints: Sequence[int] | None, n: int, dense: bool = False) -> np.ndarray:
    if dense:
        return np.arange(1, n + 1, dtype=np.int64)
    if checkpoints is None:
        return geometric_grid(n)
    ck = np.unique(np.asarray(list(checkpoints), dtype=np.int64))
    if ck.size == 0 or ck[0] < 1 or ck[-1] > n:
        raise ValueError(f"checkpoints must lie in [1, {n}]")
    return ck


@dataclass(frozen=True)
class Trajectory:
    steps: np.ndarray
    position: np.ndarray
    zeros: np.ndarray
    nonzeros: np.ndarray


def simulate_block(kernel, params, key, rep0, count, ckpts):
    """Run the compiled engine for one block of replicates."""
    nz = np.empty((count, ckpts.size), dtype=np.int64)
    pos = np.empty((count, ckpts.size), dtype=np.int64)
    first = np.empty(count, dtype=np.int8)
    _engine.simulate_block(
        kernel.code, max(kernel.m, 1), float(params.p), float(params.q),
        np.uint64(key), rep0, count, ckpts, nz, pos, first,
    )
    return nz, pos, first


def simulate_path(
    kernel: MemoryKernel,
    params: ProbTriple,
    n: int,
    seed: int,
    checkpoints: Sequence[int] | None = None,
    dense: bool = False,
    replicate: int = 0,
) -> Trajectory:
    """One path, snapshotted at ``checkpoints`` (powers of two and n by default)."""
    if n < 1:
        raise ValueError("horizon must be >= 1")
    ckpts = normalize_checkpoints(checkpoints, n, dense)
    nz, pos, _ = simulate_block(kernel, params, master_key(seed), replicate, 1, ckpts)
    return Trajectory(ckpts, pos[0], ckpts - nz[0], nz[0])
