"""Deterministic ensembles of walks with mergeable streaming summaries.

Replicates are simulated in fixed-size blocks.  Replicate k's randomness
depends only on (seed, k), and block summaries are reduced by a fixed
pairwise tree, so a summary is identical for any number of workers.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytics import full_mean
from .rng import master_key
from .walk import MemoryKernel, ProbTriple, normalize_checkpoints, simulate_block

FUNCTIONALS = ("nonzeros", "scaled", "centered")
BRANCHES = ("all", "first_zero", "first_nonzero")
HIST_EDGES = np.round(np.linspace(-6.0, 6.0, 121), 10)
SCHEMA_VERSION = "erwdelay.ensemble/1"


class EmptyBranchError(ValueError):
    pass


def default_workers() -> int:
    """Worker count: CPU count, capped by ``ERW_THREADS`` when set."""
    n = os.cpu_count() or 1
    cap = os.environ.get("ERW_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return n


@dataclass
class Moments:
    """Count, mean, centered sum of squares, range and exact-zero count."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    min: float = math.inf
    max: float = -math.inf
    zero_count: int = 0

    @classmethod
    def from_values(cls, values: np.ndarray) -> "Moments":
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        dev = values - mean
        return cls(
            int(values.size),
            mean,
            float(np.dot(dev, dev)),
            float(values.min()),
            float(values.max()),
            int(np.count_nonzero(values == 0)),
        )

    def merge(self, other: "Moments") -> "Moments":
        if other.count == 0:
            return Moments(**self.__dict__)
        if self.count == 0:
            return Moments(**other.__dict__)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return Moments(
            n, mean, m2, min(self.min, other.min), max(self.max, other.max),
            self.zero_count + other.zero_count,
        )

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan

    @property
    def zero_fraction(self) -> float:
        return self.zero_count / self.count if self.count else math.nan


@dataclass
class Histogram:
    """Bins of width 0.1 on [-6, 6], under/overflow, and a separate exact-zero bucket."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros(HIST_EDGES.size - 1, dtype=np.int64))
    underflow: int = 0
    overflow: int = 0
    exact_zero: int = 0

    @classmethod
    def from_values(cls, values: np.ndarray) -> "Histogram":
        zero = values == 0
        rest = values[~zero]
        counts, _ = np.histogram(rest, bins=HIST_EDGES)
        return cls(
            counts.astype(np.int64),
            int(np.count_nonzero(rest < HIST_EDGES[0])),
            int(np.count_nonzero(rest > HIST_EDGES[-1])),
            int(np.count_nonzero(zero)),
        )

    def merge(self, other: "Histogram") -> "Histogram":
        return Histogram(
            self.counts + other.counts,
            self.underflow + other.underflow,
            self.overflow + other.overflow,
            self.exact_zero + other.exact_zero,
        )

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow + self.exact_zero


def centering(kernel: MemoryKernel, n: int, r: float, first: np.ndarray) -> np.ndarray | float:
    """Centering used by the sqrt(n)-scaled functional.

    first-only: n(1-r) I*_1; first-and-last: n(1-r)/(1+r) I*_1; full: the
    exact mean E(N*_n); last-only and windows: 0.
    """
    if kernel.kind == "first":
        return n * (1 - r) * first
    if kernel.kind == "first-last":
        return n * (1 - r) / (1 + r) * first
    if kernel.kind == "full":
        return full_mean(int(n), r)
    return 0.0


def functional_values(name: str, kernel: MemoryKernel, r: float, n: int, nz: np.ndarray, first: np.ndarray) -> np.ndarray:
    nz = nz.astype(float)
    if name == "nonzeros":
        return nz
    if name == "scaled":
        return nz / float(n) ** (1 - r)
    if name == "centered":
        return (nz - centering(kernel, n, r, first)) / math.sqrt(n)
    raise ValueError(f"unknown functional {name!r}")


@dataclass(frozen=True)
class EnsembleSpec:
    kernel: MemoryKernel
    params: ProbTriple
    horizon: int
    replicates: int
    seed: int
    checkpoints: tuple[int, ...] | None = None
    block_size: int = 4096
    keep_samples: bool = False
    time_budget: float | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    def grid(self) -> np.ndarray:
        return normalize_checkpoints(self.checkpoints, self.horizon)


@dataclass
class EnsembleSamples:
    """Raw per-replicate values at the checkpoints (rows in replicate order)."""

    checkpoints: np.ndarray
    nonzeros: np.ndarray
    positions: np.ndarray
    first: np.ndarray

    def column(self, n: int) -> np.ndarray:
        return self.nonzeros[:, int(np.searchsorted(self.checkpoints, n))]


@dataclass
class EnsembleSummary:
    kernel: MemoryKernel
    params: ProbTriple
    horizon: int
    seed: int
    checkpoints: tuple[int, ...]
    replicates: int
    stats: dict[str, dict[str, list[Moments]]]
    histograms: dict[str, list[Histogram]]
    partial: bool = False
    requested_replicates: int = 0
    samples: EnsembleSamples | None = field(default=None, repr=False, compare=False)

    def moments(self, functional: str, n: int | None = None, branch: str = "all") -> Moments:
        j = len(self.checkpoints) - 1 if n is None else self.checkpoints.index(n)
        return self.stats[branch][functional][j]

    def merge(self, other: "EnsembleSummary") -> "EnsembleSummary":
        if self.checkpoints != other.checkpoints or self.kernel != other.kernel:
            raise ValueError("cannot merge summaries of different ensembles")
        stats = {
            b: {f: [x.merge(y) for x, y in zip(self.stats[b][f], other.stats[b][f])] for f in self.stats[b]}
            for b in self.stats
        }
        hists = {b: [x.merge(y) for x, y in zip(self.histograms[b], other.histograms[b])] for b in self.histograms}
        return EnsembleSummary(
            self.kernel, self.params, self.horizon, self.seed, self.checkpoints,
            self.replicates + other.replicates, stats, hists,
            self.partial or other.partial, self.requested_replicates + other.requested_replicates,
        )

    def to_json_dict(self) -> dict:
        def mom(m: Moments) -> dict:
            return {
                "count": m.count, "mean": m.mean, "variance": _finite(m.variance),
                "stderr": _finite(m.stderr), "min": _finite(m.min), "max": _finite(m.max),
                "zero_count": m.zero_count,
            }

        return {
            "schema_version": SCHEMA_VERSION,
            "kernel": self.kernel.label,
            "p": self.params.p, "q": self.params.q, "r": self.params.r,
            "horizon": self.horizon,
            "seed": self.seed,
            "replicates": self.replicates,
            "requested_replicates": self.requested_replicates,
            "partial": self.partial,
            "checkpoints": list(self.checkpoints),
            "stats": {b: {f: [mom(m) for m in ms] for f, ms in fs.items()} for b, fs in self.stats.items()},
            "histograms": {
                "edges": HIST_EDGES.tolist(),
                "functional": "centered",
                "branches": {
                    b: [
                        {"counts": h.counts.tolist(), "underflow": h.underflow,
                         "overflow": h.overflow, "exact_zero": h.exact_zero}
                        for h in hs
                    ]
                    for b, hs in self.histograms.items()
                },
            },
        }

    def to_rows(self) -> list[tuple]:
        """Tidy rows (kernel, r, n, branch, statistic, value, stderr)."""
        rows = []
        for j, n in enumerate(self.checkpoints):
            for b in BRANCHES:
                for f in FUNCTIONALS:
                    m = self.stats[b][f][j]
                    rows.append((self.kernel.label, self.params.r, n, b, f"{f}.count", m.count, ""))
                    if m.count == 0:
                        continue
                    rows.append((self.kernel.label, self.params.r, n, b, f"{f}.mean", m.mean, _blank(m.stderr)))
                    rows.append((self.kernel.label, self.params.r, n, b, f"{f}.variance", _blank(m.variance), ""))
                    rows.append((self.kernel.label, self.params.r, n, b, f"{f}.min", m.min, ""))
                    rows.append((self.kernel.label, self.params.r, n, b, f"{f}.max", m.max, ""))
                    rows.append((self.kernel.label, self.params.r, n, b, f"{f}.zero_fraction", m.zero_fraction, ""))
        return rows


def _finite(x: float):
    return None if not math.isfinite(x) else x


def _blank(x: float):
    return "" if not math.isfinite(x) else x


def _summarize_block(spec: EnsembleSpec, grid: np.ndarray, nz: np.ndarray, first: np.ndarray) -> EnsembleSummary:
    r = spec.params.r
    masks = {"all": slice(None), "first_zero": first == 0, "first_nonzero": first == 1}
    stats = {b: {f: [] for f in FUNCTIONALS} for b in BRANCHES}
    hists = {b: [] for b in BRANCHES}
    for j, n in enumerate(grid):
        for f in FUNCTIONALS:
            vals = functional_values(f, spec.kernel, r, int(n), nz[:, j], first)
            for b, mask in masks.items():
                sub = vals[mask]
                stats[b][f].append(Moments.from_values(sub))
                if f == "centered":
                    hists[b].append(Histogram.from_values(sub))
    return EnsembleSummary(
        spec.kernel, spec.params, spec.horizon, spec.seed, tuple(int(c) for c in grid),
        int(nz.shape[0]), stats, hists, requested_replicates=int(nz.shape[0]),
    )


def _tree_merge(items: list[EnsembleSummary]) -> EnsembleSummary:
    while len(items) > 1:
        nxt = [items[i].merge(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def run_ensemble(spec: EnsembleSpec, workers: int | None = None) -> EnsembleSummary:
    """Simulate ``spec.replicates`` walks and summarize them at the checkpoints.

    If ``spec.time_budget`` (seconds) runs out, the blocks finished so far are
    returned with ``partial=True``.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    grid = spec.grid()
    key = master_key(spec.seed)
    blocks = [
        (start, min(spec.block_size, spec.replicates - start))
        for start in range(0, spec.replicates, spec.block_size)
    ]

    def job(block):
        start, count = block
        nz, pos, first = simulate_block(spec.kernel, spec.params, key, start, count, grid)
        return _summarize_block(spec, grid, nz, first), (nz, pos, first)

    t0 = time.monotonic()
    done: list = []
    partial = False
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for w in range(0, len(blocks), workers):
            # the first wave always runs so a partial result is never empty
            if w and spec.time_budget is not None and time.monotonic() - t0 > spec.time_budget:
                partial = True
                break
            done.extend(pool.map(job, blocks[w:w + workers]))

    summary = _tree_merge([s for s, _ in done])
    summary.partial = partial
    summary.requested_replicates = spec.replicates
    if spec.keep_samples:
        summary.samples = EnsembleSamples(
            grid,
            np.concatenate([raw[0] for _, raw in done]),
            np.concatenate([raw[1] for _, raw in done]),
            np.concatenate([raw[2] for _, raw in done]),
        )
    return summary


def branch_split(summary: EnsembleSummary) -> tuple[EnsembleSummary, EnsembleSummary]:
    """Summaries conditioned on I*_1 = 0 and on I*_1 = 1 (each as its "all" branch)."""
    out = []
    for branch in ("first_zero", "first_nonzero"):
        if summary.stats[branch]["nonzeros"][0].count == 0:
            raise EmptyBranchError(f"branch {branch} is empty (replicates={summary.replicates})")
        empty_stats = {f: [Moments() for _ in summary.checkpoints] for f in FUNCTIONALS}
        empty_hist = [Histogram() for _ in summary.checkpoints]
        stats = {b: empty_stats for b in BRANCHES}
        hists = {b: empty_hist for b in BRANCHES}
        stats["all"] = stats[branch] = summary.stats[branch]
        hists["all"] = hists[branch] = summary.histograms[branch]
        count = summary.stats[branch]["nonzeros"][0].count
        out.append(
            EnsembleSummary(
                summary.kernel, summary.params, summary.horizon, summary.seed, summary.checkpoints,
                count, stats, hists, summary.partial, summary.requested_replicates,
            )
        )
    return out[0], out[1]
