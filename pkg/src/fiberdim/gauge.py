"""Gauge functions and the schedules they drive.

A gauge is a non-decreasing ``phi`` with ``phi(0) = 0``.  Three families
are built in (power, power-log with a monotonicity cutoff, tabulated)
plus the quotient family produced by :func:`divide_by_power`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .cantor import CantorError, MassDistribution, Schedule, _Leaves, power_le, scan_windows
from .exact import prod, q


class GaugeError(ValueError):
    pass


@dataclass(frozen=True)
class Gauge:
    family: str
    s: Fraction = Fraction(0)
    t: Fraction = Fraction(0)
    r_cut: float | None = None
    table: tuple[tuple[float, float], ...] | None = None
    base: "Gauge | None" = None
    d: int = 0

    # -- evaluation -------------------------------------------------------

    @property
    def cutoff(self) -> float | None:
        if self.family == "powerlog":
            s, t = float(self.s), float(self.t)
            if t > 0:
                return math.exp(-t / s)
            return math.exp(-1.0)
        return self.r_cut

    def _raw(self, r: np.ndarray) -> np.ndarray:
        s = float(self.s)
        if self.family == "power":
            with np.errstate(divide="ignore"):
                return np.where(r > 0, np.power(np.where(r > 0, r, 1.0), s), 0.0)
        if self.family == "powerlog":
            t = float(self.t)
            rr = np.where(r > 0, r, 0.5)
            return np.where(r > 0, rr**s * np.log(1.0 / rr) ** t, 0.0)
        if self.family == "tabulated":
            xs = np.array([0.0] + [p[0] for p in self.table])
            ys = np.array([0.0] + [p[1] for p in self.table])
            return np.interp(r, xs, ys)
        if self.family == "quotient":
            d = self.d
            top = float(self.base(1.0))
            rr = np.where(r > 0, r, 1.0)
            val = np.minimum(self.base(rr) / rr**d, top)
            return np.where(r > 0, np.where(r > 1, top, val), 0.0)
        raise GaugeError(f"unknown family {self.family!r}")

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        cut = self.cutoff
        if cut is not None:
            arr = np.minimum(arr, cut)
        out = self._raw(arr)
        return float(out) if np.ndim(out) == 0 else out

    def __str__(self):
        if self.family == "power":
            return f"Power({self.s})"
        if self.family == "powerlog":
            return f"PowerLog({self.s}, {self.t})"
        if self.family == "quotient":
            return f"{self.base}/r^{self.d}"
        return f"Tabulated({len(self.table)} points)"


def Power(s, r_cut: float | None = None) -> Gauge:
    s = q(s)
    if s < 0:
        raise GaugeError("power exponent must be >= 0")
    return Gauge("power", s, r_cut=r_cut)


def PowerLog(s, t) -> Gauge:
    s, t = q(s), q(t)
    if t == 0:
        return Power(s)
    if s < 0 or (s == 0 and t > 0):
        raise GaugeError("r^s log(1/r)^t is not non-decreasing near 0 for these parameters")
    return Gauge("powerlog", s, t)


def Tabulated(points: Sequence[tuple[float, float]]) -> Gauge:
    pts = tuple((float(r), float(v)) for r, v in sorted(points))
    if not pts or pts[0][0] <= 0:
        raise GaugeError("tabulated gauges need sample radii > 0")
    vals = [0.0] + [v for _, v in pts]
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise GaugeError("tabulated gauge is not non-decreasing")
    return Gauge("tabulated", table=pts)


def in_class(g: Gauge, s) -> bool | None:
    """Whether phi(r) / r**s -> infinity as r -> 0+.  None when unknown."""
    s = q(s)
    if g.family == "power":
        return g.s < s
    if g.family == "powerlog":
        return g.s < s or (g.s == s and g.t > 0)
    if g.family == "quotient" and s > 0:
        return in_class(g.base, s + g.d)
    return None


def is_monotone(g: Gauge, n: int = 1000) -> bool:
    r = np.concatenate([[0.0], np.logspace(-12, 1, n)])
    v = g(r)
    return bool(v[0] == 0 and np.all(np.diff(v) >= -1e-15 * np.abs(v[1:])))


# ---------------------------------------------------------------- Phi


def _psi(g: Gauge, r: float) -> float:
    return r * g(1.0 / r)


def phi_sup(g: Gauge, x: float, tol: float = 1e-9) -> tuple[float, bool]:
    """sup{r > 0 : r phi(1/r) <= x} and whether the set was empty."""
    if in_class(g, 1) is False:
        raise GaugeError(f"{g} is not in G(1); the supremum may be infinite")
    if tol <= 0:
        raise GaugeError("tol must be positive")
    hi = 1.0
    for _ in range(4000):
        if _psi(g, hi) > x:
            break
        hi *= 2.0
    else:
        raise GaugeError("bracket growth did not terminate; r phi(1/r) stays below x")
    lo = None
    r = hi
    for _ in range(2000):
        r *= 0.5
        if r == 0.0:
            break
        if _psi(g, r) <= x:
            lo = r
            break
    if lo is None:
        return 0.0, True
    while hi - lo > tol and hi - lo > 4 * math.ulp(hi):
        mid = 0.5 * (lo + hi)
        if _psi(g, mid) <= x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), False


def phi_transform(g: Gauge, x: float, tol: float = 1e-9) -> float:
    """Phi(x) = sup{r : r phi(1/r) <= x} + 1, by doubling then bisection.

    When the set is empty the supremum is taken to be 0, so 1 is
    returned and a warning is emitted.
    """
    if x < 1:
        raise GaugeError("x must be >= 1")
    sup, empty = phi_sup(g, float(x), tol)
    if empty:
        warnings.warn(f"r phi(1/r) > {x} for all tested r; using sup of the empty set = 0", stacklevel=2)
    return sup + 1.0


def _iroot(n: int, k: int) -> int:
    """floor(n ** (1/k)) for non-negative ints (integer Newton iteration)."""
    if n < 2:
        return n
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x**k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


def phi_ceiling(g: Gauge, X: int) -> tuple[int, str]:
    """An integer A with A >= Phi(X), and how it was certified."""
    if g.family == "power" and (g.r_cut is None or g.r_cut >= 1):
        s = g.s
        if s >= 1:
            raise GaugeError(f"{g} is not in G(1)")
        p, qd = s.numerator, s.denominator
        e = qd - p  # sup = X**(qd/e)
        target = X**qd
        r = _iroot(target, e)
        if r**e == target:
            return r + 1, "exact"
        return r + 2, "exact"
    if g.family == "powerlog":
        if in_class(g, 1) is not True:
            raise GaugeError(f"{g} is not in G(1)")
        bits = max(128, 4 * X.bit_length())
        with mpmath.workprec(bits):
            s, t = mpmath.mpf(g.s.numerator) / g.s.denominator, mpmath.mpf(g.t.numerator) / g.t.denominator
            cut = mpmath.exp(-t / s) if t > 0 else mpmath.exp(-1)

            def psi(r):
                u = min(1 / r, cut)
                return r * u**s * mpmath.log(1 / u) ** t

            Xm = mpmath.mpf(X)
            hi = mpmath.mpf(1)
            for _ in range(4096):
                if psi(hi) > Xm:
                    break
                hi *= 2
            else:
                raise GaugeError(f"Phi({X}) exceeds 2**4096 for {g}; schedule is not representable")
            lo = hi / 2
            while psi(lo) > Xm and lo > mpmath.mpf(2) ** (-bits):
                lo /= 2
            for _ in range(bits + 8):
                mid = (lo + hi) / 2
                if psi(mid) <= Xm:
                    lo = mid
                else:
                    hi = mid
            return int(mpmath.floor(hi)) + 2, "mpmath"
    val = phi_transform(g, float(X))
    return int(math.ceil(val * (1 + 1e-9))) + 1, "float"


def phi_dominated(g: Gauge, X: int, A: int) -> bool:
    """Exact (where possible) check that A >= Phi(X)."""
    if g.family == "power" and (g.r_cut is None or g.r_cut >= 1):
        p, qd = g.s.numerator, g.s.denominator
        e = qd - p
        # A >= sup + 1  <=>  (A - 1)**e >= X**qd
        return A >= 1 and (A - 1) ** e >= X**qd
    ceiling, _ = phi_ceiling(g, X)
    return A >= ceiling - 1


# ---------------------------------------------------------------- division


def divide_by_power(psi: Gauge, d: int) -> Gauge:
    """phi(r) = inf over u in [r, 1] of psi(u) / u**d (and psi(1) beyond 1)."""
    d = int(d)
    if d < 0:
        raise GaugeError("d must be >= 0")
    member = in_class(psi, d + 1)
    if member is False:
        raise GaugeError(f"{psi} is not in G({d + 1})")
    if psi.family == "power":
        if psi.s >= d:
            return Power(psi.s - d, r_cut=1.0)
        return Power(0, r_cut=1.0)
    if psi.family == "powerlog":
        # u -> u^(s-d) log(1/u)^t is unimodal on (0, 1], so the infimum over
        # [r, 1] is min(psi(r)/r^d, psi(1))
        return Gauge("quotient", base=psi, d=d)
    if psi.family in ("tabulated", "quotient"):
        top = float(psi(1.0))
        lo = psi.table[0][0] if psi.family == "tabulated" else 1e-12
        u = np.logspace(math.log10(lo), 0.0, 1024)
        vals = psi(u) / u**d
        env = np.minimum.accumulate(vals[::-1])[::-1]
        env = np.minimum(env, top)
        return Tabulated(list(zip(u.tolist(), env.tolist())))
    raise GaugeError(f"unsupported family {psi.family!r}")


# ---------------------------------------------------------------- schedules


def verify_gauge_schedule(g: Gauge, d: int, schedule: Schedule) -> list[dict]:
    """Re-check a_n >= (2s)^{8n} a_1...a_{n-1}, a_n >= Phi(ratio), and b_n = a_n/(2s)^{n+3}."""
    base = 2 * 2**d
    out = []
    a, b = schedule.a, schedule.b
    for n in range(1, len(a) + 1):
        an, bn = a[n - 1], b[n - 1]
        growth = an >= base ** (8 * n) * prod(a[: n - 1])
        X = base ** sum(k + 3 for k in range(1, n + 2))
        out.append(
            {
                "n": n,
                "growth": growth,
                "phi": phi_dominated(g, X, an),
                "integral_b": an == bn * base ** (n + 3),
            }
        )
    return out


def gauge_schedule(g: Gauge, d: int, depth: int) -> Schedule:
    """Smallest admissible a_n (multiples of (2s)^{n+3}) meeting both schedule inequalities."""
    if in_class(g, 1) is not True:
        raise GaugeError(f"{g} is not known to lie in G(1)")
    base = 2 * 2**d
    a: list[int] = []
    for n in range(1, depth + 1):
        M = base ** (n + 3)
        growth = base ** (8 * n) * prod(a)
        X = base ** sum(k + 3 for k in range(1, n + 2))
        A, _ = phi_ceiling(g, X)
        need = max(growth, A)
        a.append(-(-need // M) * M)
    sched = Schedule(tuple(a), tuple(an // base ** (n + 3) for n, an in enumerate(a, 1)))
    for row in verify_gauge_schedule(g, d, sched):
        if not (row["growth"] and row["phi"] and row["integral_b"]):
            raise GaugeError(f"schedule re-verification failed at level {row['n']}")
    return sched


# ---------------------------------------------------------------- measures


def hausdorff_premeasure(diams, g: Gauge, delta) -> float:
    """sum phi(diam_i) for one cover whose sets all have diameter <= delta."""
    d = np.asarray([float(x) for x in diams], dtype=float)
    if d.size == 0:
        return 0.0
    if np.any(d < 0):
        raise GaugeError("negative diameter")
    if np.any(d > float(delta)):
        raise GaugeError(f"cover element of diameter {d.max()} exceeds delta = {delta}")
    return float(math.fsum(np.atleast_1d(g(d)).tolist()))


@dataclass
class GaugeMassReport:
    sup_ratio: float
    passed: bool
    window: tuple[Fraction, Fraction]
    exact: bool


def gauge_mass_check(mass: MassDistribution, g: Gauge, max_level: int, c=4) -> GaugeMassReport:
    """sup mu(B) / phi(diam B) over the window family used by verify_mass_bound."""
    sub = mass.subset
    if max_level < 1 or max_level > sub.depth:
        raise CantorError(f"max_level = {max_level} must lie in [1, {sub.depth}]")
    cap = Fraction(1, prod(sub.parent.a[:max_level]))
    leaves = _Leaves(mass)
    c = q(c)

    def ratio(m, dm):
        with np.errstate(divide="ignore"):
            return m / np.asarray(g(dm))

    scan = scan_windows(leaves, ratio, cap, near_level=float(c))
    exact = g.family == "power" and g.r_cut is None
    if exact:
        ok = power_le(scan.mass, scan.diam, c, g.s) and all(power_le(m, x1 - x0, c, g.s) for (x0, x1), m in scan.near)
        ok = ok and scan.best <= float(c) * (1 + 1e-9)
    else:
        ok = scan.best <= float(c)
    return GaugeMassReport(scan.best, ok, scan.window, exact)


# ---------------------------------------------------------------- JSON


def _num(x: Fraction):
    return float(x) if Fraction(float(x)) == x else f"{x.numerator}/{x.denominator}"


def to_json(g: Gauge) -> dict:
    if g.family == "power":
        doc = {"family": "power", "s": _num(g.s)}
        if g.r_cut is not None:
            doc["r_cut"] = g.r_cut
        return doc
    if g.family == "powerlog":
        return {"family": "powerlog", "s": _num(g.s), "t": _num(g.t)}
    if g.family == "tabulated":
        return {"family": "tabulated", "points": [list(p) for p in g.table]}
    return {"family": "quotient", "base": to_json(g.base), "d": g.d}


def from_json(doc: dict) -> Gauge:
    fam = doc.get("family")
    if fam == "power":
        return Power(q(doc["s"]), doc.get("r_cut"))
    if fam == "powerlog":
        return PowerLog(q(doc["s"]), q(doc["t"]))
    if fam == "tabulated":
        return Tabulated([tuple(p) for p in doc["points"]])
    if fam == "quotient":
        return Gauge("quotient", base=from_json(doc["base"]), d=int(doc["d"]))
    raise GaugeError(f"unknown gauge family {fam!r}")


def schedule_to_json(s: Schedule) -> dict:
    return {"a": [str(v) for v in s.a], "b": None if s.b is None else [str(v) for v in s.b]}
