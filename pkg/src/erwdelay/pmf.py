"""Finite probability mass functions over integer support."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Mapping


@dataclass(frozen=True)
class Pmf:
    """Exact or floating-point pmf on a sorted integer support.

    Probabilities may be ``Fraction`` (rational mode) or ``float``.
    """

    support: tuple[int, ...]
    probs: tuple[Real, ...]

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs must have equal length")
        if list(self.support) != sorted(set(self.support)):
            raise ValueError("support must be strictly increasing")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        total = sum(self.probs)
        if self.is_exact:
            if total != 1:
                raise ValueError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {float(total)!r}, not 1")

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, Real], drop_zeros: bool = False) -> "Pmf":
        items = sorted((int(k), v) for k, v in mapping.items() if not (drop_zeros and v == 0))
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @property
    def is_exact(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for p in self.probs)

    def as_dict(self) -> dict[int, Real]:
        return dict(zip(self.support, self.probs))

    def prob(self, k: int):
        return self.as_dict().get(k, 0)

    def moment(self, order: int = 1):
        return sum(p * k**order for k, p in zip(self.support, self.probs))

    def mean(self):
        return self.moment(1)

    def variance(self):
        m = self.mean()
        return self.moment(2) - m * m

    def to_float(self) -> "Pmf":
        return Pmf(self.support, tuple(float(p) for p in self.probs))

    def tv_distance(self, other: "Pmf | Mapping[int, float]") -> float:
        a = self.as_dict()
        b = other.as_dict() if isinstance(other, Pmf) else dict(other)
        keys = set(a) | set(b)
        return 0.5 * sum(abs(float(a.get(k, 0)) - float(b.get(k, 0))) for k in keys)
