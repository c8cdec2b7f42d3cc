"""Deterministic counterexample functions.

* moduli of continuity for compact families (linear and Hoelder),
* the cone ``y0 + h(|x - x0|)`` that touches the family at one point,
* the singleton-zero staircase with its nested sets C_n and segment
  families Gamma_n,
* the sawtooth sum ``G = sum g_n`` and witness trees of points inside a
  level set of ``f + G``.

Everything that is rational is computed with Fractions.  Truncation at a
finite depth is explicit in each config.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import rng
from .exact import IntervalUnion, prod, q, qstr
from .functions import GridFunction, grid_values

SCHEMA = "construct/1"
CONE_GRID = 2**12


class ConstructError(ValueError):
    pass


# ---------------------------------------------------------------- moduli


def _rational_root(x: Fraction, k: int) -> Fraction | None:
    if x < 0:
        return None

    def iroot(n):
        r = int(round(n ** (1.0 / k))) if n < 2**1000 else 1 << (n.bit_length() // k)
        for c in (r - 1, r, r + 1):
            if c >= 0 and c**k == n:
                return c
        return None

    a, b = iroot(x.numerator), iroot(x.denominator)
    return None if a is None or b is None else Fraction(a, b)


@dataclass(frozen=True)
class Modulus:
    family: str  # "linear" or "hoelder"
    c: Fraction
    alpha: Fraction = Fraction(1)

    def __post_init__(self):
        if self.c <= 0 or not 0 < self.alpha <= 1:
            raise ConstructError("a modulus needs c > 0 and 0 < alpha <= 1")

    def value(self, t) -> Fraction:
        """h(t), exact when t**alpha is rational, otherwise rounded from a float."""
        t = q(t)
        if t < 0:
            raise ConstructError("moduli are defined on [0, oo)")
        if self.alpha == 1:
            return self.c * t
        root = _rational_root(t, self.alpha.denominator)
        if root is not None:
            return self.c * root**self.alpha.numerator
        return Fraction(self.__call__(float(t)))

    def __call__(self, t):
        return float(self.c) * np.power(np.asarray(t, dtype=float), float(self.alpha))

    def inverse(self, v, halvings: int = 64) -> Fraction:
        """h^{-1}(v): closed form for linear moduli, rational bisection otherwise."""
        v = q(v)
        if v < 0:
            raise ConstructError("negative modulus value")
        if self.alpha == 1:
            return v / self.c
        root = _rational_root(v / self.c, self.alpha.numerator)
        if root is not None:
            return root**self.alpha.denominator
        if v == 0:
            return Fraction(0)
        # bracket around the float estimate, then bisect with exact comparisons
        est = Fraction(float(v / self.c) ** float(1 / self.alpha)) or Fraction(1, 2**1100)
        lo, hi = est / 2, est * 2
        while self.exceeds_at(lo, v):
            lo /= 2
        while not self.exceeds_at(hi, v):
            hi *= 2
        for _ in range(halvings):
            mid = (lo + hi) / 2
            if self.exceeds_at(mid, v):
                hi = mid
            else:
                lo = mid
        return hi

    def exceeds_at(self, t: Fraction, v: Fraction) -> bool:
        """Exact test of h(t) > v (no rounding); cost grows with alpha's denominator."""
        p, r = self.alpha.numerator, self.alpha.denominator
        return (self.c**r) * t**p > v**r


def Linear(c) -> Modulus:
    return Modulus("linear", q(c))


def Hoelder(c, alpha) -> Modulus:
    return Modulus("hoelder", q(c), q(alpha))


def modulus_for_family(family: str, *params) -> Modulus:
    """A modulus strictly dominating every member of the family, for t > 0.

    ``("lipschitz", L)`` gives ``2 L t``; ``("hoelder", c, alpha)`` gives
    ``2 c t**alpha``.
    """
    fam = family.lower()
    if fam == "lipschitz":
        (L,) = params
        return Linear(2 * q(L))
    if fam in ("hoelder", "holder"):
        c, alpha = params
        return Hoelder(2 * q(c), q(alpha)) if q(alpha) != 1 else Linear(2 * q(c))
    raise ConstructError(f"unknown family {family!r}")


def respects_modulus(f: GridFunction, h: Modulus, n: int = 257) -> bool:
    """Spot check |f(x) - f(z)| < h(|x - z|) on pairs of an n-point grid."""
    x = np.linspace(0.0, 1.0, n)
    v = np.asarray(f.values(x), dtype=float)
    dx = np.abs(x[:, None] - x[None, :])
    dv = np.abs(v[:, None] - v[None, :])
    off = dx > 0
    return bool(np.all(dv[off] < h(dx[off]) * (1 + 1e-9)))


# ---------------------------------------------------------------- cone


def cone_function(x0, y0, h: Modulus) -> GridFunction:
    x0, y0 = q(x0), q(y0)

    def exact(x):
        return y0 + h.value(abs(q(x) - x0))

    xs = tuple(Fraction(i, CONE_GRID) for i in range(CONE_GRID + 1))
    ys = tuple(exact(x) for x in xs)
    vector = lambda x: float(y0) + h(np.abs(np.asarray(x, dtype=float) - float(x0)))
    return GridFunction(xs, ys, "linear", 1, exact, vector, name="cone")


def random_lipschitz(gen: np.random.Generator, x0, y0, L=1, pieces: int = 64) -> GridFunction:
    """Random piecewise-linear f with f(x0) = y0 and slopes in [-L, L].

    Breakpoints sit on the 1/pieces grid (plus x0); each slope is
    L * k / pieces for a uniform integer k in [-pieces, pieces].
    """
    x0, y0, L = q(x0), q(y0), q(L)
    xs = sorted({Fraction(i, pieces) for i in range(pieces + 1)} | {x0})
    slopes = [L * Fraction(int(k), pieces) for k in gen.integers(-pieces, pieces + 1, size=len(xs) - 1)]
    i0 = xs.index(x0)
    ys = [Fraction(0)] * len(xs)
    ys[i0] = y0
    for i in range(i0, len(xs) - 1):
        ys[i + 1] = ys[i] + slopes[i] * (xs[i + 1] - xs[i])
    for i in range(i0, 0, -1):
        ys[i - 1] = ys[i] - slopes[i - 1] * (xs[i] - xs[i - 1])
    return GridFunction(tuple(xs), tuple(ys), "linear", 1, name="lipschitz")


def cone_violations(f: GridFunction, cone: GridFunction, x0, grid: int = CONE_GRID) -> list[Fraction]:
    """Grid points x != x0 where f(x) < cone(x) fails (exact)."""
    x0 = q(x0)
    fv = grid_values(f, grid)
    gv = list(cone.ys) if len(cone.xs) == grid + 1 and cone.xs[1] == Fraction(1, grid) else grid_values(cone, grid)
    return [Fraction(i, grid) for i, (a, b) in enumerate(zip(fv, gv)) if Fraction(i, grid) != x0 and not a < b]


# ---------------------------------------------------------------- staircase


@dataclass(frozen=True)
class StaircaseConfig:
    alpha: tuple[Fraction, ...]

    def __post_init__(self):
        al = tuple(q(a) for a in self.alpha)
        object.__setattr__(self, "alpha", al)
        prev = Fraction(1, 2)
        for n, a in enumerate(al, 1):
            if a <= 0:
                raise ConstructError(f"alpha_{n} must be positive")
            if a > prev / 2:
                raise ConstructError(f"halving violated: alpha_{n} = {a} > alpha_{n - 1}/2 = {prev / 2}")
            prev = a

    @property
    def depth(self) -> int:
        return len(self.alpha)

    @property
    def tail(self) -> Fraction:
        """Sum of the alpha_k beyond the truncation (unknown; bounded by alpha_N)."""
        return self.alpha[-1] if self.alpha else Fraction(1, 2)

    def z(self, signs: Sequence[int]) -> Fraction:
        return Fraction(1, 2) + sum((k * a for k, a in zip(signs, self.alpha)), Fraction(0))

    @staticmethod
    def zvalue(signs: Sequence[int]) -> Fraction:
        return Fraction(1, 2) + sum((Fraction(k, 2 ** (i + 1)) for i, k in enumerate(signs, 1)), Fraction(0))

    def points(self) -> list[tuple[Fraction, Fraction, tuple[int, ...]]]:
        """All truncated z-points with their values, sorted by position."""
        out = []
        level = [()]
        for _ in range(self.depth):
            level = [s + (k,) for s in level for k in (-1, 1)]
            out.extend((self.z(s), self.zvalue(s), s) for s in level)
        out.sort()
        return out


def rank_signs(i: int, n: int) -> tuple[int, ...]:
    """The i-th (1-based) sign tuple of length n in lexicographic order, -1 before +1."""
    if not 1 <= i <= 2**n:
        raise ConstructError(f"rank {i} out of range for length {n}")
    b = i - 1
    return tuple(1 if (b >> (n - 1 - k)) & 1 else -1 for k in range(n))


def _stair_eval(cfg: StaircaseConfig, x: Fraction) -> Fraction:
    """Value at the largest truncated z-point <= x (0 if there is none)."""
    N = cfg.depth
    if N == 0:
        return Fraction(0)
    best = Fraction(0)
    half = Fraction(1, 2)
    if x >= half:
        # everything with k_1 = -1 lies left of 1/2; its maximum is -,+,+,...,+
        best = cfg.zvalue((-1,) + (1,) * (N - 1))
        signs, c = [1], half + cfg.alpha[0]
    else:
        signs, c = [-1], half - cfg.alpha[0]
    n = 1
    while True:
        if c <= x:
            best = cfg.zvalue(signs)
        if n == N:
            return best
        k = 1 if c <= x else -1
        c += k * cfg.alpha[n]
        signs.append(k)
        n += 1


def staircase_g(cfg: StaircaseConfig) -> GridFunction:
    """Sup-extension of the z-point values, truncated at depth N.

    At x = 1 the value is 1 - 2**-(N+1) rather than 1 (truncation).
    """

    def exact(x):
        x = q(x)
        if not 0 <= x <= 1:
            raise ConstructError(f"{x} outside [0, 1]")
        return _stair_eval(cfg, x)

    pts = cfg.points()
    xs = [Fraction(0)] + [p[0] for p in pts] + ([Fraction(1)] if pts and pts[-1][0] < 1 else [])
    ys = [Fraction(0)] + [p[1] for p in pts]
    if len(ys) < len(xs) - 1:
        ys.append(ys[-1])
    xs_t = tuple(xs)
    ys_t = tuple(ys[: len(xs_t) - 1])
    xf = np.array([float(v) for v in xs_t])
    yf = np.array([float(v) for v in ys_t])

    def vector(x):
        idx = np.clip(np.searchsorted(xf, np.asarray(x, dtype=float), side="right") - 1, 0, len(yf) - 1)
        return yf[idx]

    return GridFunction(xs_t, ys_t, "constant", 1, exact, vector, name="staircase")


def truncation_gap(cfg: StaircaseConfig) -> Fraction:
    return Fraction(1, 2 ** (cfg.depth + 1))


def preimage_diameter(cfg: StaircaseConfig, i: int, n: int) -> Fraction | None:
    """Diameter of the truncated z-points whose value lies in ((i-1)/2^n, i/2^n)."""
    lo, hi = Fraction(i - 1, 2**n), Fraction(i, 2**n)
    inside = [z for z, _, _ in cfg.points() if lo < _stair_eval(cfg, z) < hi]
    if not inside:
        return None
    return max(inside) - min(inside)


@dataclass
class GammaLevel:
    n: int
    C: IntervalUnion
    segments: list[tuple[Fraction, IntervalUnion]]  # (z, J) in rank order

    @property
    def empty_segments(self) -> int:
        return sum(1 for _, J in self.segments if J.is_empty())


def _next_level(alpha_next: Fraction, prev: GammaLevel, h: Modulus, zpoint) -> GammaLevel:
    n = prev.n
    r = h.value(4 * alpha_next)
    if r >= Fraction(1, 2 ** (n + 2)):
        raise ConstructError(f"degenerate C_{n + 1}: h(4 alpha_{n + 1}) = {r} >= 2^-{n + 2}; shrink alpha_{n + 1}")
    C = prev.C
    for i in range(2 ** (n + 1) + 1):
        C = C.remove_open(Fraction(i, 2 ** (n + 1)), r)
    segs = []
    for i in range(1, 2 ** (n + 1) + 1):
        z = zpoint(rank_signs(i, n + 1))
        segs.append((z, C.intersect(Fraction(i - 1, 2 ** (n + 1)), Fraction(i, 2 ** (n + 1)))))
    return GammaLevel(n + 1, C, segs)


def _level0() -> GammaLevel:
    unit = IntervalUnion.of([(0, 1)])
    return GammaLevel(0, unit, [(Fraction(1, 2), unit)])


def c_gamma_sets(cfg: StaircaseConfig, h: Modulus, depth: int) -> list[GammaLevel]:
    if depth > cfg.depth:
        raise ConstructError(f"depth {depth} exceeds the alpha schedule ({cfg.depth})")
    levels = [_level0()]
    for n in range(depth):
        levels.append(_next_level(cfg.alpha[n], levels[-1], h, cfg.z))
    return levels


def gamma_membership(f: GridFunction, level: GammaLevel) -> bool:
    for z, J in level.segments:
        if not J.is_empty() and J.contains(f(z)):
            return True
    return False


def choose_alpha_mc(sampler: Callable[[np.random.Generator], GridFunction], h: Modulus, depth: int, trials: int, seed: int, max_halvings: int = 60) -> StaircaseConfig:
    """Pick alpha_{n+1} so that the sampled mass leaving pi(Gamma_n) stays below 2^-(n+2).

    Each level starts at alpha_n / 2 and halves until the estimated loss
    plus two standard errors is at most 2^-(n+2).
    """
    if trials < 1:
        raise ConstructError("trials must be >= 1")
    gen = rng.generator(seed, "alpha")
    samples = [sampler(gen) for _ in range(trials)]
    for k, f in enumerate(samples[: min(trials, 8)]):
        if not respects_modulus(f, h, 65):
            raise ConstructError(f"sample {k} violates the modulus bound")
    alpha: list[Fraction] = []
    prev = _level0()
    member = np.array([gamma_membership(f, prev) for f in samples])
    for n in range(depth):
        a = (alpha[-1] if alpha else Fraction(1, 2)) / 2
        for _ in range(max_halvings + 1):
            if h.value(4 * a) >= Fraction(1, 2 ** (n + 2)):
                a /= 2
                continue
            zf = lambda s, al=tuple(alpha) + (a,): Fraction(1, 2) + sum((k * x for k, x in zip(s, al)), Fraction(0))
            nxt = _next_level(a, prev, h, zf)
            new = np.array([gamma_membership(f, nxt) for f in samples])
            lost = float(np.mean(member & ~new))
            sigma = math.sqrt(lost * (1 - lost) / trials)
            if lost + 2 * sigma <= 1 / 2 ** (n + 2):
                break
            a /= 2
        else:
            raise ConstructError(f"retention bound not met at level {n + 1} within {max_halvings} halvings")
        alpha.append(a)
        prev, member = nxt, member & new
    return StaircaseConfig(tuple(alpha))


@dataclass
class IsolatedZeroReport:
    near_zero: int
    checked: int
    violations: list[tuple[Fraction, Fraction]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_isolated_zero(f: GridFunction, g: GridFunction, cfg: StaircaseConfig, tol, *, modulus: Modulus, grid: int = CONE_GRID) -> IsolatedZeroReport:
    """Near-zeros of f - g over C_N must not have partners at distance in (4 alpha_N, 4 alpha_1]."""
    if not respects_modulus(f, modulus):
        raise ConstructError("f does not satisfy the strict modulus bound")
    tol = q(tol)
    C = c_gamma_sets(cfg, modulus, cfg.depth)[-1].C
    xs = [Fraction(i, grid) for i in range(grid + 1)]
    near = [x for x in xs if abs(f(x) - g(x)) <= tol]
    lo, hi = 4 * cfg.alpha[-1], 4 * cfg.alpha[0]
    checked, bad = 0, []
    for x in near:
        if not C.contains(g(x)):
            continue
        checked += 1
        bad.extend((x, z) for z in near if lo < abs(x - z) <= hi)
    return IsolatedZeroReport(len(near), checked, bad)


# ---------------------------------------------------------------- sawtooth


@dataclass(frozen=True)
class SawtoothConfig:
    h: Modulus
    a: tuple[int, ...]
    b: tuple[int, ...]
    paper_exact: bool = False

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(int(v) for v in self.a))
        object.__setattr__(self, "b", tuple(int(v) for v in self.b))
        if len(self.a) != len(self.b):
            raise ConstructError("a and b must have the same length")
        if any(v < 1 for v in self.a) or any(v < 1 for v in self.b):
            raise ConstructError("schedules must be positive")
        if self.paper_exact:
            bad = [r["n"] for r in sawtooth_checks(self) if not all(r[k] for k in ("modulus", "growth", "b_rule"))]
            if bad:
                raise ConstructError(f"schedule fails the paper_exact check at levels {bad}")

    @property
    def depth(self) -> int:
        return len(self.a)

    def pitch(self, n: int) -> Fraction:
        return Fraction(1, prod(self.a[:n]))


def sawtooth_checks(cfg: SawtoothConfig) -> list[dict]:
    """Which schedule inequalities each level satisfies (exact)."""
    rows = []
    for n, (an, bn) in enumerate(zip(cfg.a, cfg.b), 1):
        v = Fraction(1, 2 ** (n + 2))
        rows.append(
            {
                "n": n,
                "modulus": not cfg.h.exceeds_at(Fraction(1, an), v),  # a_n >= 1/h^{-1}(v)
                "growth": an >= 2 ** (5 * n * n),
                "b_rule": bn == -(-an // 32),
            }
        )
    return rows


def sawtooth_schedule(h: Modulus, depth: int, growth_cap: Sequence[int] | None = None) -> SawtoothConfig:
    """Smallest a_n >= max(1/h^{-1}(2^-(n+2)), 2^{5n^2}), b_n = ceil(a_n / 32).

    With ``growth_cap`` the 2^{5n^2} term is replaced by the given values
    and the config is not marked paper_exact.
    """
    a = []
    for n in range(1, depth + 1):
        v = Fraction(1, 2 ** (n + 2))
        t = h.inverse(v)
        m = math.ceil(1 / t)
        while m > 1 and not h.exceeds_at(Fraction(1, m - 1), v):
            m -= 1
        while h.exceeds_at(Fraction(1, m), v):
            m += 1
        grow = 2 ** (5 * n * n) if growth_cap is None else int(growth_cap[n - 1])
        a.append(max(m, grow))
    b = [-(-x // 32) for x in a]
    return SawtoothConfig(h, tuple(a), tuple(b), paper_exact=growth_cap is None)


def tooth(cfg: SawtoothConfig, n: int, x: Fraction) -> Fraction:
    """g_n(x): (-1)^i 2^-n at x = i p_n, affine in between."""
    P = prod(cfg.a[:n])
    u = x * P
    i = u.numerator // u.denominator
    t = u - i
    sign = 1 if i % 2 == 0 else -1
    return sign * (1 - 2 * t) / 2**n


def partial_sum(cfg: SawtoothConfig, m: int, x) -> Fraction:
    """G_m(x) exactly, over the common denominator den(x) 2^m."""
    x = q(x)
    a, b = x.numerator, x.denominator
    total = 0
    P = 1
    for n in range(1, m + 1):
        P *= cfg.a[n - 1]
        i, r = divmod(a * P, b)
        term = (b - 2 * r) << (m - n)
        total += term if i % 2 == 0 else -term
    return Fraction(total, b << m)


def grid_partial_sum(cfg: SawtoothConfig, k: int, j: int) -> Fraction:
    """G_k(j p_k) in integer arithmetic."""
    Pk = prod(cfg.a[:k])
    total = 0
    Pn = 1
    for n in range(1, k + 1):
        Pn *= cfg.a[n - 1]
        Dn = Pk // Pn
        i, r = divmod(j, Dn)
        term = (Dn - 2 * r) * 2 ** (k - n) * Pn
        total += term if i % 2 == 0 else -term
    return Fraction(total, 2**k * Pk)


def _partial_sum_f(cfg: SawtoothConfig, m: int, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    for n in range(1, m + 1):
        u = x * float(prod(cfg.a[:n]))
        i = np.floor(u)
        t = u - i
        sign = np.where(np.mod(i, 2) == 0, 1.0, -1.0)
        out += sign * (1 - 2 * t) / 2.0**n
    return out


def sawtooth_g(cfg: SawtoothConfig, m: int | None = None) -> GridFunction:
    """G_m = g_1 + ... + g_m (m defaults to the config depth), evaluable anywhere.

    Breakpoints are materialised when the finest grid has at most 2^16 cells.
    """
    m = cfg.depth if m is None else m
    exact = lambda x: partial_sum(cfg, m, x)
    vector = lambda x: _partial_sum_f(cfg, m, np.asarray(x, dtype=float))
    P = prod(cfg.a[:m])
    if P <= 2**16:
        xs = tuple(Fraction(k, P) for k in range(P + 1))
        ys = tuple(exact(x) for x in xs)
        return GridFunction(xs, ys, "linear", 1, exact, vector, name=f"sawtooth{m}")
    return GridFunction((), (), "linear", 1, exact, vector, name=f"sawtooth{m}")


def lipschitz_bound(cfg: SawtoothConfig, m: int) -> Fraction:
    """sum_{i<=m} 2^{1-i} / p_i, which bounds Lip(G_m)."""
    return sum((Fraction(2, 2**i) * prod(cfg.a[:i]) for i in range(1, m + 1)), Fraction(0))


# ---------------------------------------------------------------- witness tree


@dataclass
class LevelNode:
    level: int
    index: int  # interval [index * p, (index + 1) * p] with p = p_{m + level}
    x: Fraction
    residual: Fraction
    parent: int | None  # position in the previous level's node list
    bracket: tuple[Fraction, Fraction] | None = None  # (u, v)


@dataclass
class LevelTree:
    y: Fraction
    m: int
    levels: list[list[LevelNode]]
    complete: bool
    failure: str | None = None

    def interval(self, cfg: SawtoothConfig, node: LevelNode) -> tuple[Fraction, Fraction]:
        p = cfg.pitch(self.m + node.level)
        return node.index * p, (node.index + 1) * p


def _affine_on(f: GridFunction, lo: Fraction, hi: Fraction) -> bool:
    if f.exact is not None:
        return f.name == "zero"
    i = bisect.bisect_right(f.xs, lo)
    return i >= len(f.xs) or f.xs[i] >= hi


def _root(F: Callable[[Fraction], Fraction], f: GridFunction, u: Fraction, v: Fraction, y: Fraction, halvings: int) -> Fraction:
    """x between u and v with F(x) = y, given F(u) <= y <= F(v).

    Bisection keeps the invariant; once the bracket has no breakpoint of f
    inside, F is affine there and the root is solved for exactly.
    """
    lo, hi = u, v  # F(lo) <= y <= F(hi); lo may exceed hi
    for _ in range(halvings + 1):
        a, b = min(lo, hi), max(lo, hi)
        if _affine_on(f, a, b):
            Flo, Fhi = F(lo), F(hi)
            if Flo == Fhi:
                return lo
            return lo + (y - Flo) * (hi - lo) / (Fhi - Flo)
        mid = (lo + hi) / 2
        if F(mid) <= y:
            lo = mid
        else:
            hi = mid
    return lo if y - F(lo) <= F(hi) - y else hi


def witness_level_tree(f: GridFunction, cfg: SawtoothConfig, y, levels: int, halvings: int = 64, max_grid: int = 2**20) -> LevelTree:
    """Nested intervals with points x where (f + G_{m+n})(x) = y.

    Finds the smallest m at which f + G_m crosses y on its grid, then at
    each level selects b_{m+n+1} child intervals inside I n U(x, p_{m+n}/16),
    certifies the sign bracket at their endpoints and solves for the next
    point.  Failures are reported, not raised.
    """
    y = q(y)
    N = cfg.depth
    if levels < 0 or levels >= N:
        raise ConstructError(f"levels must lie in [0, {N - 1}]")
    F = lambda k: (lambda x: f(x) + partial_sum(cfg, k, x))

    found = None
    top = -math.inf
    bottom = math.inf
    for m in range(1, N - levels + 1):
        P = prod(cfg.a[:m])
        if P > max_grid:
            break
        xsf = np.arange(P + 1, dtype=float) / P
        approx = np.asarray(f.values(xsf), dtype=float) + _partial_sum_f(cfg, m, xsf)
        top, bottom = max(top, approx.max()), min(bottom, approx.min())
        cand = np.nonzero((np.minimum(approx[:-1], approx[1:]) <= float(y) + 1e-12) & (np.maximum(approx[:-1], approx[1:]) >= float(y) - 1e-12))[0]
        Fm = F(m)
        for k in cand:
            x0, x1 = Fraction(int(k), P), Fraction(int(k) + 1, P)
            v0, v1 = Fm(x0), Fm(x1)
            if min(v0, v1) <= y <= max(v0, v1):
                found = (m, int(k), x0, x1, v0, v1)
                break
        if found:
            break
    if found is None:
        raise ConstructError(f"y = {y} is not strictly between the minimum and maximum of f + g (grid range [{bottom}, {top}])")
    m, k, x0, x1, v0, v1 = found
    Fm = F(m)
    u, v = (x0, x1) if v0 <= v1 else (x1, x0)
    xr = _root(Fm, f, u, v, y, halvings)
    root = LevelNode(0, k, xr, abs(Fm(xr) - y), None, (u, v))
    tree = LevelTree(y, m, [[root]], True)

    for n in range(levels):
        a_next = cfg.a[m + n]
        b_next = cfg.b[m + n]
        p = cfg.pitch(m + n)
        pc = cfg.pitch(m + n + 1)
        rad = p / 16
        Fk = F(m + n + 1)
        out = []
        k = m + n + 1
        fz = f.is_zero
        for pos, node in enumerate(tree.levels[-1]):
            I0 = node.index * p
            # children J = [I0 + t pc, I0 + (t+1) pc] with x - rad < J < x + rad
            t_lo = max(0, math.floor((node.x - rad - I0) / pc) + 1)
            t_hi = min(a_next - 1, math.ceil((node.x + rad - I0) / pc) - 2)
            have = t_hi - t_lo + 1
            if have < b_next:
                tree.complete = False
                tree.failure = f"level {n} node {node.index}: only {max(have, 0)} child intervals inside U(x, p/16), need {b_next}"
                return tree
            mid = (node.x - I0) / pc - Fraction(1, 2)
            c = min(max(round(mid), t_lo), t_hi)
            near = range(max(t_lo, c - b_next), min(t_hi, c + b_next) + 1)
            chosen = sorted(sorted(near, key=lambda t: (abs(t - mid), t))[:b_next])
            for t in chosen:
                j = node.index * a_next + t
                e0, e1 = j * pc, (j + 1) * pc
                G0, G1 = grid_partial_sum(cfg, k, j), grid_partial_sum(cfg, k, j + 1)
                F0 = G0 if fz else G0 + f(e0)
                F1 = G1 if fz else G1 + f(e1)
                # g_k is +2^-k at even grid points and -2^-k at odd ones
                (u, Fu), (v, Fv) = ((e1, F1), (e0, F0)) if j % 2 == 0 else ((e0, F0), (e1, F1))
                if not Fu <= y <= Fv:
                    tree.complete = False
                    tree.failure = f"level {n + 1} interval {j}: bracket {Fu} <= {y} <= {Fv} fails"
                    return tree
                if fz or _affine_on(f, e0, e1):
                    xr = u if Fu == Fv else u + (y - Fu) * (v - u) / (Fv - Fu)
                    # G_k is affine on J, so this is its exact value at xr
                    val = G0 + (G1 - G0) * (xr - e0) / pc + (0 if fz else f(xr))
                else:
                    xr = _root(Fk, f, u, v, y, halvings)
                    val = Fk(xr)
                out.append(LevelNode(n + 1, j, xr, abs(val - y), pos, (u, v)))
        tree.levels.append(out)
    return tree


def recheck_level_tree(tree: LevelTree, f: GridFunction, cfg: SawtoothConfig) -> list[str]:
    """Independent re-verification of a witness tree; returns a list of problems."""
    problems = []
    m = tree.m
    for n, nodes in enumerate(tree.levels):
        p = cfg.pitch(m + n)
        for node in nodes:
            lo, hi = node.index * p, (node.index + 1) * p
            if hi - lo != p:
                problems.append(f"level {n} interval {node.index} has wrong length")
            if not lo <= node.x <= hi:
                problems.append(f"level {n} point outside its interval")
            val = f(node.x) + partial_sum(cfg, m + n, node.x)
            if abs(val - tree.y) != node.residual:
                problems.append(f"level {n} residual mismatch at {node.index}")
            u, v = node.bracket
            Fu = f(u) + partial_sum(cfg, m + n, u)
            Fv = f(v) + partial_sum(cfg, m + n, v)
            if not Fu <= tree.y <= Fv:
                problems.append(f"level {n} bracket fails at {node.index}")
            if n > 0:
                par = tree.levels[n - 1][node.parent]
                pp = cfg.pitch(m + n - 1)
                plo = par.index * pp
                if not (plo <= lo and hi <= plo + pp):
                    problems.append(f"level {n} interval {node.index} not inside its parent")
                if not (par.x - pp / 16 < lo and hi < par.x + pp / 16):
                    problems.append(f"level {n} interval {node.index} not inside U(x, p/16)")
    return problems


def level_set_counts(f: GridFunction, cfg: SawtoothConfig, y, depth: int, sample: int = 4096, seed: int = 0) -> list[tuple[Fraction, float]]:
    """Box counts of the level sets of the partial sums, one per level.

    At level j the count is the number of level-j grid intervals on which
    f + G_j attains y (a sign change of f + G_j - y between the endpoints).
    Intervals that cannot contain a crossing of any later partial sum are
    pruned using the tail bound sum_{i>j} 2^-i; when more than ``sample``
    candidates remain, a seeded subsample is expanded and the counts are
    scaled (a multi-stage unbiased estimate).  Returns (p_j, N_j) pairs.
    """
    yf = float(q(y))
    gen = rng.generator(seed, "levelset")
    out = []
    parents_all = parents = np.array([0], dtype=np.int64)
    weight = 1.0  # how many real intervals each kept interval stands for
    for j in range(1, depth + 1):
        aj = cfg.a[j - 1]
        P = prod(cfg.a[:j])
        if len(parents) > sample:
            parents = np.sort(gen.choice(parents, size=sample, replace=False))
            weight *= len(parents_all) / sample
        kids = (parents[:, None] * aj + np.arange(aj)[None, :]).ravel()
        left = kids.astype(float) / P
        right = (kids + 1).astype(float) / P
        vl = np.asarray(f.values(left), dtype=float) + _partial_sum_f(cfg, j, left) - yf
        vr = np.asarray(f.values(right), dtype=float) + _partial_sum_f(cfg, j, right) - yf
        hit = (np.minimum(vl, vr) <= 0) & (np.maximum(vl, vr) >= 0)
        out.append((Fraction(1, P), float(hit.sum()) * weight))
        tail = sum(2.0**-i for i in range(j + 1, depth + 1))
        keep = (np.minimum(vl, vr) <= tail) & (np.maximum(vl, vr) >= -tail)
        parents_all = kids[keep]
        parents = parents_all
    return out


# ---------------------------------------------------------------- JSON


def modulus_json(h: Modulus) -> dict:
    return {"family": h.family, "c": qstr(h.c), "alpha": qstr(h.alpha)}


def modulus_from_json(doc: dict) -> Modulus:
    return Modulus(doc["family"], q(doc["c"]), q(doc.get("alpha", 1)))


def to_json(obj) -> dict:
    if isinstance(obj, StaircaseConfig):
        return {"schema": SCHEMA, "type": "staircase", "alpha": [qstr(a) for a in obj.alpha]}
    if isinstance(obj, SawtoothConfig):
        return {
            "schema": SCHEMA,
            "type": "sawtooth",
            "h": modulus_json(obj.h),
            "a": [str(v) for v in obj.a],
            "b": [str(v) for v in obj.b],
            "paper_exact": obj.paper_exact,
        }
    if isinstance(obj, LevelTree):
        return {
            "schema": SCHEMA,
            "type": "level_tree",
            "y": qstr(obj.y),
            "m": obj.m,
            "complete": obj.complete,
            "failure": obj.failure,
            "levels": [[[nd.level, nd.index, qstr(nd.x), qstr(nd.residual), nd.parent, None if nd.bracket is None else [qstr(v) for v in nd.bracket]] for nd in lvl] for lvl in obj.levels],
        }
    raise TypeError(type(obj))


def from_json(doc: dict):
    if doc.get("schema") != SCHEMA:
        raise ConstructError(f"unsupported schema {doc.get('schema')!r}")
    if doc["type"] == "staircase":
        return StaircaseConfig(tuple(q(a) for a in doc["alpha"]))
    if doc["type"] == "sawtooth":
        return SawtoothConfig(modulus_from_json(doc["h"]), tuple(int(v) for v in doc["a"]), tuple(int(v) for v in doc["b"]), doc.get("paper_exact", False))
    if doc["type"] == "level_tree":
        levels = [
            [LevelNode(lv, i, q(x), q(r), p, None if br is None else (q(br[0]), q(br[1]))) for lv, i, x, r, p, br in lvl]
            for lvl in doc["levels"]
        ]
        return LevelTree(q(doc["y"]), int(doc["m"]), levels, bool(doc["complete"]), doc.get("failure"))
    raise ConstructError(f"cannot load {doc['type']!r}")
