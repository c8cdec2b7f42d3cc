"""Piecewise-linear and piecewise-constant maps on an explicit grid."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .exact import q, qstr


@dataclass(frozen=True)
class GridFunction:
    """A map [x_0, x_last] -> R^d.

    ``kind == "linear"``: ``ys[i]`` is the value at ``xs[i]``, affine in
    between.  ``kind == "constant"``: ``ys[i]`` is the value on
    ``[xs[i], xs[i+1])`` (the last cell is closed).  For d > 1 each entry
    of ``ys`` is a tuple.

    ``exact`` / ``vector`` optionally override evaluation, for functions
    whose grid is too fine to materialise (or which are not piecewise
    linear at all, such as a Hoelder cone).
    """

    xs: tuple[Fraction, ...]
    ys: tuple
    kind: str = "linear"
    d: int = 1
    exact: Callable | None = None
    vector: Callable | None = None
    name: str = ""

    def __call__(self, x):
        if self.exact is not None:
            return self.exact(q(x))
        return self._interp(q(x))

    def _interp(self, x: Fraction):
        xs = self.xs
        if not xs[0] <= x <= xs[-1]:
            raise ValueError(f"{x} outside the domain [{xs[0]}, {xs[-1]}]")
        if self.kind == "constant":
            i = min(bisect.bisect_right(xs, x) - 1, len(self.ys) - 1)
            return self.ys[i]
        i = bisect.bisect_right(xs, x) - 1
        if i >= len(xs) - 1:
            return self.ys[-1]
        t = (x - xs[i]) / (xs[i + 1] - xs[i])
        y0, y1 = self.ys[i], self.ys[i + 1]
        if self.d == 1:
            return y0 + t * (y1 - y0)
        return tuple(a + t * (b - a) for a, b in zip(y0, y1))

    def values(self, x: np.ndarray) -> np.ndarray:
        """Float evaluation; shape (n,) for d == 1 else (n, d)."""
        x = np.asarray(x, dtype=float)
        if self.vector is not None:
            return self.vector(x)
        if self.exact is not None and not self.xs:
            out = [self.exact(q(float(v))) for v in x]
            return np.array(out, dtype=float)
        xf = np.array([float(v) for v in self.xs])
        Y = np.array(self.ys, dtype=float) if self.d == 1 else np.array([[float(c) for c in y] for y in self.ys])
        if self.kind == "constant":
            idx = np.clip(np.searchsorted(xf, x, side="right") - 1, 0, len(self.ys) - 1)
            return Y[idx]
        if self.d == 1:
            return np.interp(x, xf, Y)
        return np.stack([np.interp(x, xf, Y[:, j]) for j in range(self.d)], axis=1)

    @property
    def is_zero(self) -> bool:
        if self.exact is not None:
            return self.name == "zero"
        flat = self.ys if self.d == 1 else [c for y in self.ys for c in y]
        return all(v == 0 for v in flat)

    def slopes(self) -> list[Fraction]:
        if self.kind != "linear" or self.d != 1:
            raise ValueError("slopes need a real piecewise-linear function")
        return [(y1 - y0) / (x1 - x0) for x0, x1, y0, y1 in zip(self.xs, self.xs[1:], self.ys, self.ys[1:])]

    def lipschitz(self) -> Fraction:
        """Exact Lipschitz constant (max slope magnitude over all coordinates)."""
        if self.kind == "constant":
            raise ValueError("piecewise-constant functions are not Lipschitz")
        best = Fraction(0)
        for x0, x1, y0, y1 in zip(self.xs, self.xs[1:], self.ys, self.ys[1:]):
            if self.d == 1:
                best = max(best, abs(y1 - y0) / (x1 - x0))
            else:
                best = max(best, max(abs(b - a) for a, b in zip(y0, y1)) / (x1 - x0))
        return best


def grid_values(f: GridFunction, G: int) -> list:
    """Exact values at x = i/G, i = 0..G, for a real piecewise-linear f.

    When every breakpoint lies on the grid the values are accumulated
    along each piece with a constant rational step; otherwise each point
    is evaluated directly.
    """
    if f.d != 1:
        raise ValueError("grid_values needs a real-valued function")
    xs = f.xs
    if f.exact is None and f.kind == "linear" and xs and xs[0] == 0 and xs[-1] == 1 and all((x * G).denominator == 1 for x in xs):
        out = [f.ys[0]]
        for x0, x1, y0, y1 in zip(xs, xs[1:], f.ys, f.ys[1:]):
            n = int((x1 - x0) * G)
            step = (y1 - y0) / n
            v = y0
            for _ in range(n - 1):
                v += step
                out.append(v)
            out.append(y1)
        return out
    return [f(Fraction(i, G)) for i in range(G + 1)]


def from_points(xs: Sequence, ys: Sequence, kind: str = "linear", name: str = "") -> GridFunction:
    X = tuple(q(x) for x in xs)
    if any(b <= a for a, b in zip(X, X[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    first = ys[0] if len(ys) else 0
    if isinstance(first, (tuple, list, np.ndarray)):
        Y = tuple(tuple(q(c) for c in y) for y in ys)
        d = len(Y[0])
    else:
        Y = tuple(q(y) for y in ys)
        d = 1
    need = len(X) - 1 if kind == "constant" else len(X)
    if len(Y) != need:
        raise ValueError(f"{kind} function on {len(X)} breakpoints needs {need} values")
    return GridFunction(X, Y, kind, d, name=name)


def constant(c=0, d: int = 1) -> GridFunction:
    c = q(c)
    y = c if d == 1 else (c,) * d
    return GridFunction((Fraction(0), Fraction(1)), (y, y), "linear", d, name="zero" if c == 0 else "")


def zero(d: int = 1) -> GridFunction:
    return constant(0, d)


def identity() -> GridFunction:
    return from_points([0, 1], [0, 1], name="identity")


def to_json(f: GridFunction) -> dict:
    if not f.xs:
        raise ValueError("lazily evaluated functions have no breakpoint table")
    ys = [qstr(y) for y in f.ys] if f.d == 1 else [[qstr(c) for c in y] for y in f.ys]
    return {"kind": f.kind, "d": f.d, "xs": [qstr(x) for x in f.xs], "ys": ys, "name": f.name}


def from_json(doc: dict) -> GridFunction:
    return from_points(doc["xs"], doc["ys"], doc.get("kind", "linear"), doc.get("name", ""))
