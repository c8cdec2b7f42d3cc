"""Rational helpers shared by the construction modules."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable


def q(x) -> Fraction:
    """Coerce ints, strings ("p/q") and floats to an exact Fraction.

    Floats go through their shortest repr, so ``q(0.1) == Fraction(1, 10)``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


def qstr(x) -> str:
    x = q(x)
    return f"{x.numerator}/{x.denominator}"


def prod(xs: Iterable[int]) -> int:
    out = 1
    for v in xs:
        out *= v
    return out


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of disjoint closed intervals, sorted, with rational endpoints.

    Degenerate components (points) are allowed.  Adjacent components that
    touch are merged on construction.
    """

    parts: tuple[tuple[Fraction, Fraction], ...]

    @classmethod
    def of(cls, intervals) -> "IntervalUnion":
        items = sorted((q(a), q(b)) for a, b in intervals)
        merged: list[list[Fraction]] = []
        for a, b in items:
            if b < a:
                raise ValueError(f"empty interval [{a}, {b}]")
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return cls(tuple((a, b) for a, b in merged))

    @property
    def measure(self) -> Fraction:
        return sum((b - a for a, b in self.parts), Fraction(0))

    def is_empty(self) -> bool:
        return not self.parts

    def contains(self, x) -> bool:
        x = q(x)
        return any(a <= x <= b for a, b in self.parts)

    def remove_open(self, center, radius) -> "IntervalUnion":
        """Subtract the open interval (center - radius, center + radius)."""
        lo, hi = q(center) - q(radius), q(center) + q(radius)
        out = []
        for a, b in self.parts:
            if b <= lo or a >= hi:
                out.append((a, b))
                continue
            if a <= lo:
                out.append((a, lo))
            if b >= hi:
                out.append((hi, b))
        return IntervalUnion(tuple(out))

    def intersect(self, lo, hi) -> "IntervalUnion":
        lo, hi = q(lo), q(hi)
        out = []
        for a, b in self.parts:
            c, d = max(a, lo), min(b, hi)
            if c <= d:
                out.append((c, d))
        return IntervalUnion(tuple(out))

    def scaled(self, factor) -> "IntervalUnion":
        f = q(factor)
        return IntervalUnion(tuple((a * f, b * f) for a, b in self.parts))

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)
