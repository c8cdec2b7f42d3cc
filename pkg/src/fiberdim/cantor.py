"""Fat Cantor sets, selected subtrees and their natural measures.

Geometry is exact.  A level-``n`` piece of a tree is the closed interval
``[lo, lo + L_n]`` where ``lo`` is the sum over levels ``k <= n`` of
``shift_k + i_k * step_k`` (``i_k`` the 0-based child index).  All the
supported constructions (fat Cantor, tilings, two-branch self-similar
sets) are uniform in this sense, so any node's hull can be computed
lazily in ``O(depth)`` without materialising the level.

The canonical fat Cantor layout: at stage ``n`` every current interval
loses ``a_n - 1`` equal, equally spaced open gaps, and the total length
removed across the whole stage is ``eps * 2**-n``.  The surviving
``a_n`` subintervals all have length ``(1 - eps + eps * 2**-n) / (a_1...a_n)``.
When ``a_n == 1`` the stage budget is trimmed symmetrically from both ends
instead.  Pieces are translates of each other, so every level-``n`` piece
of the limit set carries Lebesgue measure ``(1 - eps) / (a_1...a_n)``.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import rng
from .exact import IntervalUnion, prod, q, qstr

SCHEMA = "cantor/1"
MATERIALIZE_LIMIT = 10**7


class CantorError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    a: tuple[int, ...]
    b: tuple[int, ...] | None = None

    def __post_init__(self):
        a = tuple(int(v) for v in self.a)
        object.__setattr__(self, "a", a)
        if any(v < 1 for v in a):
            raise CantorError("branching numbers must be >= 1")
        if self.b is not None:
            b = tuple(int(v) for v in self.b)
            object.__setattr__(self, "b", b)
            if len(b) != len(a):
                raise CantorError("a and b must have the same length")
            if any(v < 1 for v in b):
                raise CantorError("selected branching must be >= 1")
            for n, (x, y) in enumerate(zip(a, b), 1):
                if y > x:
                    raise CantorError(f"b_{n} = {y} exceeds a_{n} = {x}")


@dataclass(frozen=True)
class MassPullback:
    """Left/right inverses of x -> |(-inf, x] n C| for a finite union C."""

    parts: tuple[tuple[Fraction, Fraction], ...]
    before: tuple[Fraction, ...]

    @classmethod
    def of(cls, union: IntervalUnion) -> "MassPullback":
        before, acc = [], Fraction(0)
        for lo, hi in union.parts:
            before.append(acc)
            acc += hi - lo
        return cls(union.parts, tuple(before))

    @property
    def total(self) -> Fraction:
        lo, hi = self.parts[-1]
        return self.before[-1] + hi - lo

    def left(self, v: Fraction) -> Fraction:
        for (lo, hi), c in zip(self.parts, self.before):
            if v <= c + (hi - lo):
                return lo + (v - c)
        raise CantorError("value beyond the mass of C")

    def right(self, v: Fraction) -> Fraction:
        for (lo, hi), c in zip(reversed(self.parts), reversed(self.before)):
            if v >= c:
                return lo + (v - c)
        raise CantorError("negative mass value")

    def left_f(self, v: np.ndarray) -> np.ndarray:
        lo = np.array([float(p[0]) for p in self.parts])
        c = np.array([float(x) for x in self.before])
        end = c + np.array([float(p[1] - p[0]) for p in self.parts])
        j = np.clip(np.searchsorted(end, v, side="left"), 0, len(lo) - 1)
        return lo[j] + (v - c[j])

    def right_f(self, v: np.ndarray) -> np.ndarray:
        lo = np.array([float(p[0]) for p in self.parts])
        c = np.array([float(x) for x in self.before])
        j = np.clip(np.searchsorted(c, v, side="right") - 1, 0, len(lo) - 1)
        return lo[j] + (v - c[j])


@dataclass(frozen=True)
class CantorTree:
    a: tuple[int, ...]
    lengths: tuple[Fraction, ...]  # hull length per level, lengths[0] is the root
    shifts: tuple[Fraction, ...]  # offset of child 0 inside its parent, per level
    steps: tuple[Fraction, ...]  # distance between consecutive children, per level
    total_measure: Fraction
    kind: str = "fat"
    epsilon: Fraction | None = None
    pullback: MassPullback | None = None
    compact_type: bool = False
    measure_null: bool = False

    @property
    def depth(self) -> int:
        return len(self.a)

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.a)

    def count(self, n: int) -> int:
        return prod(self.a[:n])

    def piece_measure(self, n: int) -> Fraction:
        return self.total_measure / self.count(n)

    def unflatten(self, n: int, flat: int) -> tuple[int, ...]:
        idx = []
        for an in reversed(self.a[:n]):
            flat, r = divmod(flat, an)
            idx.append(r)
        return tuple(reversed(idx))

    def flatten(self, index: Sequence[int]) -> int:
        flat = 0
        for an, i in zip(self.a, index):
            flat = flat * an + i
        return flat

    def _canonical_lo(self, index: Sequence[int]) -> Fraction:
        lo = Fraction(0)
        for k, i in enumerate(index):
            if not 0 <= i < self.a[k]:
                raise CantorError(f"child index {i} out of range at level {k + 1}")
            lo += self.shifts[k] + i * self.steps[k]
        return lo

    def hull(self, index: Sequence[int]) -> tuple[Fraction, Fraction]:
        n = len(index)
        lo = self._canonical_lo(index)
        hi = lo + self.lengths[n]
        if self.pullback is not None:
            return self.pullback.left(lo), self.pullback.right(hi)
        return lo, hi

    def hull_flat(self, n: int, flat: int) -> tuple[Fraction, Fraction]:
        return self.hull(self.unflatten(n, flat))

    def iter_level(self, n: int) -> Iterator[tuple[tuple[int, ...], Fraction, Fraction]]:
        """Lazy walk over the level-``n`` pieces in left-to-right order."""
        for index in itertools.product(*(range(v) for v in self.a[:n])):
            lo, hi = self.hull(index)
            yield index, lo, hi

    def bounds(self, n: int) -> tuple[list[Fraction], list[Fraction]]:
        """Exact hull endpoints of all level-``n`` pieces (materialised)."""
        if self.count(n) > MATERIALIZE_LIMIT:
            raise CantorError(f"level {n} has {self.count(n)} pieces; iterate lazily instead")
        los = [Fraction(0)]
        for k in range(n):
            sh, st = self.shifts[k], self.steps[k]
            offs = [sh + i * st for i in range(self.a[k])]
            los = [p + o for p in los for o in offs]
        L = self.lengths[n]
        if self.pullback is None:
            return los, [x + L for x in los]
        pb = self.pullback
        return [pb.left(x) for x in los], [pb.right(x + L) for x in los]

    def bounds_float(self, n: int, flats: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Float hull endpoints, optionally only for the given flat indices."""
        if flats is None:
            los = np.zeros(1)
            for k in range(n):
                offs = float(self.shifts[k]) + float(self.steps[k]) * np.arange(self.a[k])
                los = (los[:, None] + offs[None, :]).ravel()
        else:
            flats = np.asarray(flats, dtype=np.int64)
            los = np.zeros(len(flats))
            rem = flats.copy()
            for k in reversed(range(n)):
                rem, r = np.divmod(rem, self.a[k])
                los += float(self.shifts[k]) + float(self.steps[k]) * r
        his = los + float(self.lengths[n])
        if self.pullback is not None:
            return self.pullback.left_f(los), self.pullback.right_f(his)
        return los, his


def _check_depth(a, depth):
    if depth < 0 or depth > len(a):
        raise CantorError(f"depth {depth} needs a schedule of at least that length")
    if any(int(v) < 1 for v in a[:depth]):
        raise CantorError("zero branching")


def build_fat_cantor(a: Sequence[int], epsilon, depth: int) -> CantorTree:
    eps = q(epsilon)
    if not 0 < eps < 1:
        raise CantorError("epsilon must lie in (0, 1)")
    _check_depth(a, depth)
    a = tuple(int(v) for v in a[:depth])
    lengths, shifts, steps = [Fraction(1)], [], []
    pieces = 1
    for n, an in enumerate(a, 1):
        budget = eps / (2**n * pieces)  # removed from each current interval
        if an >= 2:
            gap = budget / (an - 1)
            L = (lengths[-1] - budget) / an
            shifts.append(Fraction(0))
            steps.append(L + gap)
        else:
            L = lengths[-1] - budget
            shifts.append(budget / 2)
            steps.append(Fraction(0))
        lengths.append(L)
        pieces *= an
    return CantorTree(a, tuple(lengths), tuple(shifts), tuple(steps), 1 - eps, "fat", eps)


def tiling_tree(a: Sequence[int], depth: int) -> CantorTree:
    """Compact-type tree of [0,1]: equal closed pieces sharing endpoints."""
    _check_depth(a, depth)
    a = tuple(int(v) for v in a[:depth])
    lengths, steps = [Fraction(1)], []
    for an in a:
        lengths.append(lengths[-1] / an)
        steps.append(lengths[-1])
    return CantorTree(a, tuple(lengths), (Fraction(0),) * depth, tuple(steps), Fraction(1), "tiling", compact_type=True)


def embed_in_compact(C, a: Sequence[int], epsilon, depth: int) -> CantorTree:
    union = C if isinstance(C, IntervalUnion) else IntervalUnion.of(C)
    lam = union.measure
    if lam <= 0:
        raise CantorError("C has zero length")
    eps = q(epsilon)
    if not 0 < eps < lam:
        raise CantorError("epsilon must lie in (0, |C|)")
    base = build_fat_cantor(a, eps / lam, depth)
    if union.parts == ((Fraction(0), Fraction(1)),):
        return base
    return CantorTree(
        base.a,
        tuple(x * lam for x in base.lengths),
        tuple(x * lam for x in base.shifts),
        tuple(x * lam for x in base.steps),
        lam - eps,
        "embedded",
        eps,
        MassPullback.of(union),
    )


def _exact_ratio(s: float) -> tuple[Fraction, bool]:
    """2**(-1/s) as a Fraction, and whether it is exact."""
    inv = 1.0 / s
    if abs(inv - round(inv)) < 1e-12:
        return Fraction(1, 2 ** round(inv)), True
    r = 2.0 ** (-inv)
    n = round(1.0 / r)
    if n >= 2 and abs(1.0 / r - n) < 1e-9 * n:
        return Fraction(1, n), True
    return Fraction(r).limit_denominator(10**12), False


def prescribed_dimension_cantor(s: float, depth: int) -> CantorTree:
    """Two-branch self-similar set with ratio 2**(-1/s), of dimension s.

    The limit set is Lebesgue-null, so ``measure_null`` is set and the
    per-piece measure identity does not apply.
    """
    if not 0 < s < 1:
        raise CantorError("s must lie in (0, 1)")
    r, exact = _exact_ratio(float(s))
    lengths, steps = [Fraction(1)], []
    for _ in range(depth):
        L = lengths[-1] * r
        steps.append(lengths[-1] - L)
        lengths.append(L)
    kind = "self-similar" if exact else "self-similar~"
    return CantorTree((2,) * depth, tuple(lengths), (Fraction(0),) * depth, tuple(steps), Fraction(0), kind, measure_null=True)


# ---------------------------------------------------------------- subsets


@dataclass(frozen=True)
class SubsetTree:
    """Selected nodes of a CantorTree, level by level, as flat indices.

    ``levels[j]`` holds the selected nodes at absolute level
    ``root_level + j``, sorted.  Ordinary subsets start at the root
    (``root_level == 0``); witness trees may start deeper.
    """

    parent: CantorTree
    levels: tuple[tuple[int, ...], ...]
    b: tuple[int, ...] | None = None
    root_level: int = 0

    @property
    def depth(self) -> int:
        return self.root_level + len(self.levels) - 1

    def level(self, n: int) -> tuple[int, ...]:
        return self.levels[n - self.root_level]

    def leaves(self) -> tuple[int, ...]:
        return self.levels[-1]

    def children_counts(self, n: int) -> list[int]:
        """Number of selected children of each selected node at level n."""
        an = self.parent.a[n]
        kids = self.level(n + 1)
        counts = dict.fromkeys(self.level(n), 0)
        for f in kids:
            counts[f // an] += 1
        return [counts[p] for p in self.level(n)]

    def index_tuples(self, n: int) -> list[tuple[int, ...]]:
        return [self.parent.unflatten(n, f) for f in self.level(n)]

    def hulls(self, n: int) -> list[tuple[Fraction, Fraction]]:
        return [self.parent.hull_flat(n, f) for f in self.level(n)]


def _choose(tree: CantorTree, n: int, parent: int, bn: int, selector, seed, explicit) -> list[int]:
    an = tree.a[n - 1]
    if selector == "first":
        return list(range(bn))
    if selector == "explicit":
        pick = explicit[n - 1]
        if isinstance(pick, dict):
            pick = pick.get(tree.unflatten(n - 1, parent), pick.get("*"))
        picks = [int(i) for i in pick]
        if len(picks) != bn or any(x >= y for x, y in zip(picks, picks[1:])) or picks[0] < 0 or picks[-1] >= an:
            raise CantorError(f"explicit selection {picks} at level {n} must be {bn} increasing indices below {an}")
        return picks
    if selector == "random":
        if an <= 1 << 20:
            keys = rng.u64(seed, ("select", n, parent), np.arange(an))
            return sorted(int(i) for i in np.argsort(keys, kind="stable")[:bn])
        chosen: set[int] = set()
        c = 0
        while len(chosen) < bn:
            chosen.add(int(rng.u64(seed, ("select", n, parent), [c])[0]) % an)
            c += 1
        return sorted(chosen)
    raise CantorError(f"unknown selector {selector!r}")


def select_subset(tree: CantorTree, b: Sequence[int], selector="first", *, seed: int | None = None, explicit=None) -> SubsetTree:
    """Keep ``b_n`` children of every kept node.

    ``selector`` is ``"first"``, ``"random"`` (needs ``seed``) or
    ``"explicit"`` (needs ``explicit``: one index list per level, or per
    level a dict from parent index tuple to list with ``"*"`` as default).
    """
    b = tuple(int(v) for v in b[: tree.depth])
    if len(b) < tree.depth:
        raise CantorError("b is shorter than the tree depth")
    Schedule(tree.a, b)
    if selector == "random" and seed is None:
        raise CantorError("random selection needs a seed")
    if selector == "explicit" and explicit is None:
        raise CantorError("explicit selection needs index lists")
    levels = [(0,)]
    for n in range(1, tree.depth + 1):
        an = tree.a[n - 1]
        nxt = []
        for p in levels[-1]:
            nxt.extend(p * an + i for i in _choose(tree, n, p, b[n - 1], selector, seed, explicit))
        levels.append(tuple(nxt))
    return SubsetTree(tree, tuple(levels), b)


def triadic_subset(depth: int) -> SubsetTree:
    """The middle-thirds Cantor set as an (3, 2)-subset of the triadic tiling."""
    t = tiling_tree((3,) * depth, depth)
    return select_subset(t, (2,) * depth, "explicit", explicit=[[0, 2]] * depth)


@dataclass(frozen=True)
class MassDistribution:
    subset: SubsetTree
    weights: tuple[tuple[Fraction, ...], ...]  # aligned with subset.levels

    def weight(self, n: int) -> tuple[Fraction, ...]:
        return self.weights[n - self.subset.root_level]


def natural_measure(subset: SubsetTree) -> MassDistribution:
    """Split each node's mass equally among its selected children."""
    weights = [(Fraction(1),) * len(subset.levels[0])]
    if len(subset.levels[0]) != 1:
        weights = [(Fraction(1, len(subset.levels[0])),) * len(subset.levels[0])]
    for j in range(1, len(subset.levels)):
        n = subset.root_level + j - 1
        counts = subset.children_counts(n)
        wmap = {p: w / c for p, w, c in zip(subset.levels[j - 1], weights[-1], counts) if c}
        an = subset.parent.a[n]
        weights.append(tuple(wmap[f // an] for f in subset.levels[j]))
    return MassDistribution(subset, tuple(weights))


def check_ratio_condition(a: Sequence[int], b: Sequence[int], depth: int) -> list[dict]:
    """Per level n <= depth - 1: a_n >= (a_1...a_{n+1} / (b_1...b_{n+1}))**(n+1)."""
    out = []
    for n in range(1, depth):
        if n >= len(a) or n >= len(b):
            raise CantorError(f"level {n} needs a_{n + 1} and b_{n + 1}")
        A, B = prod(a[: n + 1]), prod(b[: n + 1])
        out.append({"n": n, "a_n": int(a[n - 1]), "ratio": Fraction(A, B), "holds": a[n - 1] * B ** (n + 1) >= A ** (n + 1)})
    return out


# ---------------------------------------------------------------- windows


@dataclass
class WindowScan:
    best: float
    window: tuple[Fraction, Fraction]
    mass: Fraction
    diam: Fraction
    tested: int
    near: list[tuple[Fraction, Fraction]] = field(default_factory=list)


class _Leaves:
    """Deepest selected pieces in normalised coordinates, exact and float."""

    def __init__(self, mass: MassDistribution):
        sub = mass.subset
        tree = sub.parent
        n = sub.depth
        flats = sub.leaves()
        if len(flats) > 200_000:
            raise CantorError("too many leaves for window enumeration")
        scale = 1 / tree.total_measure if tree.total_measure > 0 else Fraction(1)
        self.scale = scale
        self.lo, self.hi = [], []
        for f in flats:
            lo, hi = tree.hull_flat(n, f)
            self.lo.append(lo * scale)
            self.hi.append(hi * scale)
        self.w = list(mass.weight(n))
        self.cum = [Fraction(0)]
        for w in self.w:
            self.cum.append(self.cum[-1] + w)
        self.lo_f = np.array([float(x) for x in self.lo])
        self.hi_f = np.array([float(x) for x in self.hi])
        self.w_f = np.array([float(x) for x in self.w])
        self.cum_f = np.concatenate([[0.0], np.cumsum(self.w_f)])

    def cdf_f(self, x: np.ndarray) -> np.ndarray:
        j = np.searchsorted(self.lo_f, x, side="right") - 1
        jj = np.clip(j, 0, len(self.lo_f) - 1)
        frac = np.clip((x - self.lo_f[jj]) / (self.hi_f[jj] - self.lo_f[jj]), 0.0, 1.0)
        return np.where(j < 0, 0.0, self.cum_f[jj] + self.w_f[jj] * frac)

    def cdf(self, x: Fraction) -> Fraction:
        j = bisect.bisect_right(self.lo, x) - 1
        if j < 0:
            return Fraction(0)
        frac = min(max((x - self.lo[j]) / (self.hi[j] - self.lo[j]), Fraction(0)), Fraction(1))
        return self.cum[j] + self.w[j] * frac


def scan_windows(leaves: _Leaves, ratio, cap: Fraction | None, near_level: float | None = None) -> WindowScan:
    """Sup of ``ratio(mass, diam)`` over the boundary-aligned window family.

    Windows are ``[lo_i, hi_j]`` over deepest selected pieces ``i <= j`` with
    diameter at most ``cap``, plus (when ``cap`` is given) the windows of
    diameter exactly ``cap`` starting at some ``lo_i`` or ending at some
    ``hi_j``.  Because the measure is uniform on each deepest piece, these
    contain a maximiser over all intervals of diameter at most ``cap``.
    Windows whose float ratio comes within 1e-9 of ``near_level`` are
    collected for exact rechecking.
    """
    lo, hi, cum = leaves.lo_f, leaves.hi_f, leaves.cum_f
    n = len(lo)
    capf = math.inf if cap is None else float(cap)
    best, arg, tested = -math.inf, None, 0
    near = []
    thresh = None if near_level is None else near_level * (1 - 1e-9)
    jmax_all = np.searchsorted(hi, lo + capf * (1 + 1e-15), side="right") - 1
    for i in range(n):
        jm = int(jmax_all[i])
        if cap is not None:
            while jm >= i and leaves.hi[jm] - leaves.lo[i] > cap:
                jm -= 1
        if jm < i:
            continue
        js = np.arange(i, jm + 1)
        m = cum[js + 1] - cum[i]
        dm = hi[js] - lo[i]
        r = ratio(m, dm)
        tested += len(js)
        k = int(np.argmax(r))
        if r[k] > best:
            best, arg = float(r[k]), ("aligned", i, int(js[k]))
        if thresh is not None:
            for kk in np.nonzero(r >= thresh)[0]:
                near.append(("aligned", i, int(js[kk])))
    if cap is not None:
        for side, x0 in (("left", lo), ("right", hi - capf)):
            m = leaves.cdf_f(x0 + capf) - leaves.cdf_f(x0)
            r = ratio(m, np.full(n, capf))
            tested += n
            k = int(np.argmax(r))
            if r[k] > best:
                best, arg = float(r[k]), (side, k, k)
            if thresh is not None:
                near.extend((side, int(kk), int(kk)) for kk in np.nonzero(r >= thresh)[0])

    def exact(tag):
        kind, i, j = tag
        if kind == "aligned":
            x0, x1 = leaves.lo[i], leaves.hi[j]
            return (x0, x1), leaves.cum[j + 1] - leaves.cum[i]
        x0 = leaves.lo[i] if kind == "left" else leaves.hi[i] - cap
        x1 = x0 + cap
        return (x0, x1), leaves.cdf(x1) - leaves.cdf(x0)

    if arg is None:
        return WindowScan(0.0, (Fraction(0), Fraction(0)), Fraction(0), Fraction(0), 0)
    win, mw = exact(arg)
    scan = WindowScan(best, win, mw, win[1] - win[0], tested)
    scan.near = [exact(t) for t in near]
    return scan


def power_le(mass: Fraction, diam: Fraction, c: Fraction, exponent: Fraction) -> bool:
    """Exact test of mass <= c * diam**exponent for rational exponent >= 0."""
    p, qd = exponent.numerator, exponent.denominator
    if p == 0:
        return mass <= c
    return mass**qd <= c**qd * diam**p


@dataclass
class MassBoundReport:
    sup_ratio: float
    passed: bool
    window: tuple[Fraction, Fraction]
    window_mass: Fraction
    window_diam: Fraction
    exponent: Fraction
    cap: Fraction | None
    windows_tested: int
    scale: Fraction


def verify_mass_bound(mass: MassDistribution, k: int, cap="auto", c=4) -> MassBoundReport:
    """sup mu(B) / diam(B)**(1 - 1/k) over the aligned window family.

    Diameters are measured after rescaling so that the ambient fat Cantor
    set has unit Lebesgue measure.  ``cap="auto"`` restricts windows to
    diameter at most ``1/(a_1...a_k)``; ``cap=None`` scans all windows.
    """
    sub = mass.subset
    if k < 1 or k > sub.depth:
        raise CantorError(f"k = {k} must lie in [1, {sub.depth}]")
    if cap == "auto":
        cap = Fraction(1, prod(sub.parent.a[:k]))
    elif cap is not None:
        cap = q(cap)
    c = q(c)
    beta = 1 - Fraction(1, k)
    bf = float(beta)
    leaves = _Leaves(mass)
    scan = scan_windows(leaves, lambda m, d: m / d**bf, cap, near_level=float(c))
    ok = power_le(scan.mass, scan.diam, c, beta) if scan.tested else True
    for (x0, x1), mw in scan.near:
        ok = ok and power_le(mw, x1 - x0, c, beta)
    return MassBoundReport(scan.best, ok and scan.best <= float(c) * (1 + 1e-9), scan.window, scan.mass, scan.diam, beta, cap, scan.tested, leaves.scale)


# ---------------------------------------------------------------- JSON


def _tree_doc(tree: CantorTree) -> dict:
    doc = {
        "kind": tree.kind,
        "a": list(tree.a),
        "depth": tree.depth,
        "lengths": [qstr(x) for x in tree.lengths],
        "shifts": [qstr(x) for x in tree.shifts],
        "steps": [qstr(x) for x in tree.steps],
        "total_measure": qstr(tree.total_measure),
        "epsilon": None if tree.epsilon is None else qstr(tree.epsilon),
        "compact_type": tree.compact_type,
        "measure_null": tree.measure_null,
        "pullback": None if tree.pullback is None else [[qstr(lo), qstr(hi)] for lo, hi in tree.pullback.parts],
    }
    return doc


def _tree_from(doc: dict) -> CantorTree:
    pb = doc.get("pullback")
    return CantorTree(
        tuple(doc["a"]),
        tuple(q(x) for x in doc["lengths"]),
        tuple(q(x) for x in doc["shifts"]),
        tuple(q(x) for x in doc["steps"]),
        q(doc["total_measure"]),
        doc["kind"],
        None if doc.get("epsilon") is None else q(doc["epsilon"]),
        None if pb is None else MassPullback.of(IntervalUnion.of(pb)),
        doc.get("compact_type", False),
        doc.get("measure_null", False),
    )


def to_json(obj) -> dict:
    """JSON document for a CantorTree, SubsetTree or MassDistribution."""
    if isinstance(obj, CantorTree):
        return {"schema": SCHEMA, "type": "tree", "tree": _tree_doc(obj)}
    if isinstance(obj, SubsetTree):
        return {
            "schema": SCHEMA,
            "type": "subset",
            "tree": _tree_doc(obj.parent),
            "b": None if obj.b is None else list(obj.b),
            "root_level": obj.root_level,
            "nodes": [[list(obj.parent.unflatten(obj.root_level + j, f)) for f in lvl] for j, lvl in enumerate(obj.levels)],
        }
    if isinstance(obj, MassDistribution):
        doc = to_json(obj.subset)
        doc["type"] = "mass"
        doc["weights"] = [[qstr(w) for w in lvl] for lvl in obj.weights]
        return doc
    raise TypeError(type(obj))


def from_json(doc: dict):
    if doc.get("schema") != SCHEMA:
        raise CantorError(f"unsupported schema {doc.get('schema')!r}")
    tree = _tree_from(doc["tree"])
    if doc["type"] == "tree":
        return tree
    levels = tuple(tuple(tree.flatten(ix) for ix in lvl) for lvl in doc["nodes"])
    b = doc.get("b")
    sub = SubsetTree(tree, levels, None if b is None else tuple(b), doc.get("root_level", 0))
    if doc["type"] == "subset":
        return sub
    return MassDistribution(sub, tuple(tuple(q(w) for w in lvl) for lvl in doc["weights"]))
