"""The randomized perturbation process on a fat Cantor set.

On every level-n piece two independent points X, Y are drawn uniformly
from {-2^-n, 2^-n}^d and f_n = X - Y on that piece, so each coordinate of
f_n is one of -2^(1-n), 0, 2^(1-n).  The realised map is

    h = g + f_1 + ... + f_N

with g sampled at the midpoints of the deepest pieces.  Per level the
coefficient (X - Y) / 2^(1-n) is kept as an int8 array, and the sum is kept
exactly as an integer in units of 2^(1-N).

Draws come from the counter-based stream keyed by (seed, "X" or "Y",
level) with the flat piece index as counter, so any subset of pieces can be
sampled independently and in any order.
"""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import cantor, functions, rng
from .cantor import CantorTree, SubsetTree
from .exact import prod, q, qstr

SCHEMA = "perturb/1"


class PerturbError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbationSchedule:
    d: int
    a: tuple[int, ...]
    seed: int

    def __post_init__(self):
        if self.d < 1:
            raise PerturbError("d must be >= 1")
        if not self.a:
            raise PerturbError("the schedule needs at least one level")

    @property
    def depth(self) -> int:
        return len(self.a)

    @property
    def s(self) -> int:
        return 2**self.d

    def alphabet(self, n: int) -> list[tuple[Fraction, ...]]:
        """S_n = {-2^-n, 2^-n}^d, in binary order of the sign bits."""
        r = Fraction(1, 2**n)
        out = []
        for k in range(self.s):
            out.append(tuple(r if (k >> j) & 1 else -r for j in range(self.d)))
        return out


@dataclass
class Ball:
    k: int
    center: tuple[Fraction, ...]
    radius: Fraction
    measure: Fraction
    chain: tuple[tuple[Fraction, ...], ...]  # y_0, y_1, ..., y_k


@dataclass
class RunRecord:
    schedule: PerturbationSchedule
    tree: CantorTree
    g: functions.GridFunction
    coeffs: list[np.ndarray]  # level n -> (count(n), d) int8, entries in {-1, 0, 1}
    h_int: np.ndarray  # (count(N), d) int64, sum_n c_n 2^(N-n)
    g_mid: np.ndarray  # (count(N), d) float
    balls: list[Ball] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return self.tree.depth

    @property
    def unit(self) -> Fraction:
        return Fraction(2, 2**self.depth)

    @property
    def piece_measure(self) -> Fraction:
        return self.tree.piece_measure(self.depth)

    @property
    def g_is_zero(self) -> bool:
        return self.g.is_zero

    def values(self) -> np.ndarray:
        """Float h on each deepest piece, shape (count(N), d)."""
        return self.g_mid + self.h_int.astype(float) * float(self.unit)

    def partial_int(self, level: int) -> np.ndarray:
        """sum_{n<=level} c_n 2^(level-n) on each deepest piece (units 2^(1-level))."""
        N = self.depth
        out = np.zeros_like(self.h_int)
        for n in range(1, level + 1):
            anc = np.arange(self.tree.count(N), dtype=np.int64) // prod(self.tree.a[n:N])
            out += self.coeffs[n - 1][anc].astype(np.int64) << (level - n)
        return out

    def digest(self) -> str:
        hsh = hashlib.sha256()
        hsh.update(repr((self.schedule, self.tree.a, qstr(self.tree.total_measure))).encode())
        for c in self.coeffs:
            hsh.update(c.tobytes())
        hsh.update(self.g_mid.tobytes())
        return hsh.hexdigest()


def paper_schedule(d: int, n: int) -> dict:
    """a_n = (2s)^(4^n), b_n = a_n / (2s)^(n+3) and the growth inequality at n.

    The inequality a_n >= max{(2s)^(8n) a_1...a_{n-1},
    (a_1...a_{n+1} / b_1...b_{n+1})^(n+1)} is decided on exponents of 2s.
    """
    if n < 1:
        raise PerturbError("n must be >= 1")
    base = 2 * 2**d
    e_a = 4**n
    e1 = 8 * n + sum(4**k for k in range(1, n))
    e2 = (n + 1) * sum(k + 3 for k in range(1, n + 2))
    a = base**e_a
    return {
        "n": n,
        "a": a,
        "b": a // base ** (n + 3),
        "log_base_a": e_a,
        "growth_holds": e_a >= max(e1, e2),
    }


def _draw(seed: int, tag: str, n: int, count: int, d: int) -> np.ndarray:
    return rng.bits(seed, (tag, n), np.arange(count, dtype=np.uint64), d)


def sample_run(tree: CantorTree, d: int, g: functions.GridFunction | None, seed: int) -> RunRecord:
    if tree.depth < 1:
        raise PerturbError("the tree needs depth >= 1")
    N = tree.depth
    if tree.count(N) > cantor.MATERIALIZE_LIMIT:
        raise PerturbError(f"{tree.count(N)} deepest pieces exceed the limit {cantor.MATERIALIZE_LIMIT}")
    g = functions.zero(d) if g is None else g
    if g.d != d:
        raise PerturbError(f"drift has dimension {g.d}, expected {d}")
    coeffs = []
    h_int = np.zeros((tree.count(N), d), dtype=np.int64)
    for n in range(1, N + 1):
        cnt = tree.count(n)
        X = _draw(seed, "X", n, cnt, d).astype(np.int8)
        Y = _draw(seed, "Y", n, cnt, d).astype(np.int8)
        c = X - Y
        coeffs.append(c)
        anc = np.arange(tree.count(N), dtype=np.int64) // prod(tree.a[n:N])
        h_int += c[anc].astype(np.int64) << (N - n)
    lo, hi = tree.bounds_float(N)
    gm = np.asarray(g.values((lo + hi) / 2), dtype=float).reshape(len(lo), d)
    sched = PerturbationSchedule(d, tuple(tree.a), int(seed))
    return RunRecord(sched, tree, g, coeffs, h_int, gm)


def refine_cover(z: Sequence, n: int) -> list[tuple[tuple[Fraction, ...], Fraction]]:
    """The s max-norm balls B(z + y, 2^-(n+1)), y in S_{n+1}, covering B(z, 2^-n)."""
    if n < 0:
        raise PerturbError("n must be >= 0")
    z = tuple(q(v) for v in z)
    sched = PerturbationSchedule(len(z), (1,), 0)
    r = Fraction(1, 2 ** (n + 1))
    return [(tuple(a + b for a, b in zip(z, y)), r) for y in sched.alphabet(n + 1)]


def _g_slack(run: RunRecord) -> float:
    """Bound on |g(x) - g(midpoint)| over a deepest piece."""
    if run.g_is_zero:
        return 0.0
    half = float(run.tree.lengths[run.depth]) / 2
    try:
        return float(run.g.lipschitz()) * half
    except (ValueError, TypeError):
        raise PerturbError("non-zero drift needs an explicit tolerance")


def level_set(run: RunRecord, y, tol=None) -> np.ndarray:
    """Flat indices of deepest pieces with ||h(piece) - y||_oo <= tol.

    The default tolerance is the tail bound 2^(1-N) plus the drift's
    variation over a piece.  With zero drift the test is exact.
    """
    y = np.atleast_1d(np.asarray(y, dtype=object))
    if len(y) != run.schedule.d:
        raise PerturbError("y has the wrong dimension")
    if tol is None:
        tol_q = run.unit
        slack = _g_slack(run)
    else:
        tol_q = q(tol)
        slack = 0.0
        if tol_q < 0:
            raise PerturbError("tol must be >= 0")
    if run.g_is_zero and slack == 0.0:
        ok = np.ones(len(run.h_int), dtype=bool)
        for j in range(run.schedule.d):
            Y, T = q(y[j]) / run.unit, tol_q / run.unit
            lo, hi = math.ceil(Y - T), math.floor(Y + T)
            ok &= (run.h_int[:, j] >= lo) & (run.h_int[:, j] <= hi)
        return np.nonzero(ok)[0]
    vals = run.values()
    yf = np.array([float(q(v)) for v in y])
    dist = np.max(np.abs(vals - yf[None, :]), axis=1)
    return np.nonzero(dist <= float(tol_q) + slack)[0]


# ---------------------------------------------------------------- balls


def _count_rows(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct integer rows and their multiplicities (rows in lexicographic order)."""
    if len(keys) == 0:
        return keys.reshape(0, keys.shape[1] if keys.ndim == 2 else 1), np.zeros(0, dtype=np.int64)
    lo = keys.min(axis=0)
    span = keys.max(axis=0) - lo + 1
    code = np.zeros(len(keys), dtype=np.int64)
    for j in range(keys.shape[1]):
        code = code * span[j] + (keys[:, j] - lo[j])
    uc, cnt = np.unique(code, return_counts=True)
    rows = np.zeros((len(uc), keys.shape[1]), dtype=np.int64)
    rem = uc
    for j in reversed(range(keys.shape[1])):
        rem, rows[:, j] = np.divmod(rem, span[j])
    return rows + lo[None, :], cnt


def _ball_counts(units: np.ndarray, odd: bool) -> dict[tuple[int, ...], int]:
    """Count pieces per lattice centre c with |u - c| <= 1 in every coordinate.

    ``units`` are values divided by the radius.  With ``odd`` only odd
    centres are admitted.
    """
    n, d = units.shape
    cand = []
    for j in range(d):
        u = units[:, j]
        opts = []
        for off in (-1, 0, 1):
            c = np.floor(u).astype(np.int64) + off
            opts.append(c)
        opts.append(np.ceil(u).astype(np.int64) + 1)
        C = np.stack(opts, axis=1)
        ok = np.abs(u[:, None] - C) <= 1 + 1e-12
        if odd:
            ok &= C % 2 != 0
        # the four candidates can repeat (integer u); keep first occurrences
        for a in range(C.shape[1]):
            for b in range(a):
                ok[:, a] &= ~((C[:, a] == C[:, b]) & ok[:, b])
        cand.append((C, ok))
    counts: dict[tuple[int, ...], int] = defaultdict(int)
    # d is small; expand the per-coordinate candidate product
    import itertools

    for combo in itertools.product(range(cand[0][0].shape[1]), repeat=d):
        mask = np.ones(n, dtype=bool)
        for j, cj in enumerate(combo):
            mask &= cand[j][1][:, cj]
        if not mask.any():
            continue
        keys = np.stack([cand[j][0][mask, cj] for j, cj in enumerate(combo)], axis=1)
        uniq, cnt = _count_rows(keys)
        for key, c in zip(map(tuple, uniq.tolist()), cnt.tolist()):
            counts[key] += c
    return counts


def discovered_open_set(run: RunRecord, m: int) -> list[Ball]:
    """Balls B(y_0 + ... + y_k, 2^-(m+k)) whose h_k-preimage has measure >= (2s)^-(m+k+2).

    h_k = g + f_1 + ... + f_{m+k}.  Centres at k = 0 come from the grid of
    pitch 2^-m; at k >= 1 they are odd multiples of 2^-(m+k).  A ball is
    kept only if one of its one-step parents was kept at k - 1, and its
    chain records that parent.  The list is also stored on the run.
    """
    N = run.depth
    if m < 1 or m >= N:
        raise PerturbError(f"m = {m} must lie in [1, {N - 1}]")
    s = run.schedule.s
    d = run.schedule.d
    pm = run.piece_measure
    out: list[Ball] = []
    prev: dict[tuple[int, ...], Ball] = {}
    for k in range(0, N - m + 1):
        L = m + k
        radius = Fraction(1, 2**L)
        # h_k in units of the radius: partial_int is in units 2^(1-L)
        units = run.partial_int(L).astype(float) * 2.0 + run.g_mid * 2.0**L
        counts = _ball_counts(units, odd=k >= 1)
        thresh = Fraction(1, (2 * s) ** (L + 2))
        cur: dict[tuple[int, ...], Ball] = {}
        for key in sorted(counts):
            mass = counts[key] * pm
            if mass < thresh:
                continue
            center = tuple(Fraction(c, 2**L) for c in key)
            if k == 0:
                chain = (center,)
            else:
                parents = []
                for y in run.schedule.alphabet(L):
                    pc = tuple(c - yy for c, yy in zip(center, y))
                    pkey = tuple(int(v * 2 ** (L - 1)) for v in pc)
                    if all(v * 2 ** (L - 1) == int(v * 2 ** (L - 1)) for v in pc) and pkey in prev:
                        parents.append((prev[pkey], y))
                if not parents:
                    continue
                par, y = max(parents, key=lambda t: (t[0].measure, tuple(-v for v in t[0].center)))
                chain = par.chain + (y,)
            cur[key] = Ball(k, center, radius, mass, chain)
        out.extend(cur.values())
        prev = cur
        if not cur:
            break
    run.balls = out
    return out


# ---------------------------------------------------------------- witness


@dataclass
class WitnessResult:
    ok: bool
    tree: SubsetTree | None
    chain: tuple[tuple[Fraction, ...], ...]
    center: tuple[Fraction, ...]
    radius: Fraction
    bound: Fraction  # 2^(1-N) + radius
    branching: list[list[int]]  # children per node, per level
    failure: str | None = None
    pruned: list[tuple[int, int]] = field(default_factory=list)  # (level, node) dropped as starved


def _units(run: RunRecord, L: int) -> np.ndarray:
    return run.partial_int(L).astype(float) * 2.0 + run.g_mid * 2.0**L


def witness_fiber_cantor(run: RunRecord, chain: Sequence[Sequence], m: int) -> WitnessResult:
    """A subset tree of pieces whose h-values stay in the chain's final ball.

    Starting from the level-(m+k) piece with the largest share of the
    chain's preimage, each further level extends the chain by the y in
    S_(m+j) that keeps the most mass, and keeps every child piece whose
    surviving fraction is at least r_j = (2s)^-(m+j+2).  A node left with
    no such child is pruned, together with any ancestor that loses all its
    children; the run fails only if the root itself is pruned.
    """
    N = run.depth
    s, d = run.schedule.s, run.schedule.d
    chain = tuple(tuple(q(v) for v in np.atleast_1d(np.asarray(y, dtype=object))) for y in chain)
    k = len(chain) - 1
    if k < 0 or m + k > N:
        raise PerturbError("chain length does not fit the run")
    center = tuple(sum(c) for c in zip(*chain))
    L0 = m + k
    radius = Fraction(1, 2**L0)
    bound = run.unit + radius
    known = {(b.k, b.center) for b in run.balls} if run.balls else None
    if known is not None and (k, center) not in known:
        raise PerturbError(f"chain ending at {center} is not in the ball log at k = {k}")

    def inside(L, cen):
        u = _units(run, L)
        c = np.array([float(v) * 2**L for v in cen])
        return np.all(np.abs(u - c[None, :]) <= 1 + 1e-12, axis=1)

    alive = inside(L0, center)
    total = run.tree.count(N)
    if not alive.any():
        return WitnessResult(False, None, chain, center, radius, bound, [], f"ball at {center} misses the range of h_{k}")
    per = prod(run.tree.a[L0:N])
    share = np.bincount(np.arange(total) // per, weights=alive, minlength=run.tree.count(L0))
    root = int(np.argmax(share))
    levels = [(root,)]
    branching: list[list[int]] = []
    pruned: list[tuple[int, int]] = []
    cur_chain, cur_center = chain, center
    for L in range(L0 + 1, N + 1):
        alphabet = PerturbationSchedule(d, (1,), 0).alphabet(L)
        per_child = prod(run.tree.a[L:N])
        parents = levels[-1]
        a_L = run.tree.a[L - 1]
        children = [p * a_L + t for p in parents for t in range(a_L)]
        child_leaves = np.concatenate([np.arange(c * per_child, (c + 1) * per_child) for c in children])
        r = 1 / float((2 * s) ** (L + 2))
        best = None
        for y in alphabet:
            cen = tuple(c + v for c, v in zip(cur_center, y))
            surv = inside(L, cen)[child_leaves] & alive[child_leaves]
            frac = surv.reshape(len(children), per_child).mean(axis=1)
            ok = frac >= r
            starved = len(parents) - len({c // a_L for c, k_ in zip(children, ok) if k_})
            score = (starved, -int(surv.sum()))
            if best is None or score < best[0]:
                best = (score, y, cen, surv, ok)
        _, y, cen, surv, ok = best
        keep = [c for c, k_ in zip(children, ok) if k_]
        counts = [sum(1 for c in keep if c // a_L == p) for p in parents]
        branching.append(counts)
        starved = [p for p, cnt in zip(parents, counts) if cnt == 0]
        if starved:
            pruned.extend((L - 1, p) for p in starved)
            if not _prune(levels, run.tree.a, L0, set(starved)):
                return WitnessResult(False, None, cur_chain + (y,), cen, Fraction(1, 2**L), bound, branching, f"node {starved[0]} at level {L - 1} has no child with surviving fraction >= {r:.3g}, and pruning reached the root", pruned)
        kept = np.repeat(ok, per_child)
        alive = np.zeros(total, dtype=bool)
        alive[child_leaves[surv & kept]] = True
        levels.append(tuple(keep))
        cur_chain, cur_center = cur_chain + (y,), cen
    # only leaves that survived every step belong to the final set
    final = tuple(f for f in levels[-1] if alive[f])
    tree = SubsetTree(run.tree, tuple(levels[:-1]) + (final,), None, L0)
    return WitnessResult(True, tree, cur_chain, center, radius, bound, branching, None, pruned)


def _prune(levels: list[tuple[int, ...]], a: Sequence[int], L0: int, dead: set[int]) -> bool:
    """Drop starved nodes from the last level and any ancestor left childless."""
    for j in range(len(levels) - 1, -1, -1):
        levels[j] = tuple(f for f in levels[j] if f not in dead)
        if j == 0:
            return bool(levels[0])
        an = a[L0 + j - 1]
        alive_parents = {f // an for f in levels[j]}
        dead = {p for p in levels[j - 1] if p not in alive_parents}
        if not dead:
            return True
    return True


def recheck_witness(run: RunRecord, res: WitnessResult) -> list[int]:
    """Leaves of a witness tree violating ||h - centre||_oo <= 2^(1-N) + radius (exact for zero drift)."""
    if not res.ok:
        return []
    leaves = np.array(res.tree.leaves(), dtype=np.int64)
    bad = []
    for j in range(run.schedule.d):
        if run.g_is_zero:
            # h = h_int * unit, compare exactly in units of the radius' lattice
            c = res.center[j]
            for f, v in zip(leaves.tolist(), run.h_int[leaves, j].tolist()):
                if abs(v * run.unit - c) > res.bound:
                    bad.append(f)
        else:
            vals = run.values()[leaves, j]
            slack = _g_slack(run)
            bad.extend(leaves[np.abs(vals - float(res.center[j])) > float(res.bound) + slack].tolist())
    return sorted(set(bad))


# ---------------------------------------------------------------- occupation


@dataclass
class Histogram:
    edges: list[np.ndarray]
    masses: dict[tuple[int, ...], Fraction]  # bin -> exact mass
    bin_volume: float
    total: Fraction
    outside_mass: Fraction
    max_density: float

    def fraction_below(self, D: float) -> Fraction:
        """Share of the (inside) mass in bins of density <= D."""
        good = sum((m for m in self.masses.values() if float(m) / self.bin_volume <= D), Fraction(0))
        inside = self.total - self.outside_mass
        return good / inside if inside else Fraction(0)


def occupation_histogram(run: RunRecord, bins: int, bounds: Sequence[tuple[float, float]] | None = None) -> Histogram:
    """Push the piece measures through h onto a regular grid of bins per axis."""
    if bins < 2:
        raise PerturbError("need at least 2 bins per axis")
    vals = run.values()
    d = run.schedule.d
    if bounds is None:
        lo, hi = vals.min(axis=0), vals.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        lo = np.where(hi > lo, lo, lo - 0.5)
        bounds = [(float(lo[j]), float(lo[j] + span[j])) for j in range(d)]
    edges, idx = [], []
    inside = np.ones(len(vals), dtype=bool)
    for j, (a, b) in enumerate(bounds):
        if not b > a:
            raise PerturbError("bounds must have positive width")
        e = np.linspace(a, b, bins + 1)
        edges.append(e)
        k = np.floor((vals[:, j] - a) / (b - a) * bins).astype(np.int64)
        k = np.where(vals[:, j] == b, bins - 1, k)
        inside &= (k >= 0) & (k < bins)
        idx.append(k)
    pm = run.piece_measure
    keys = np.stack(idx, axis=1)[inside]
    uniq, cnt = _count_rows(keys)
    masses = {tuple(k): c * pm for k, c in zip(uniq.tolist(), cnt.tolist())}
    vol = float(np.prod([(b - a) / bins for a, b in bounds]))
    total = run.tree.total_measure
    outside = int((~inside).sum()) * pm
    maxd = max((float(m) / vol for m in masses.values()), default=0.0)
    return Histogram(edges, masses, vol, total, outside, maxd)


def modal_value(run: RunRecord) -> tuple[Fraction, ...] | tuple[float, ...]:
    """The most frequent h-value (smallest on ties); exact for zero drift."""
    if run.g_is_zero:
        uniq, cnt = _count_rows(run.h_int)
        best = uniq[int(np.argmax(cnt))]
        return tuple(int(v) * run.unit for v in best)
    vals = run.values()
    uniq, cnt = np.unique(vals, axis=0, return_counts=True)
    return tuple(float(v) for v in uniq[int(np.argmax(cnt))])


# ---------------------------------------------------------------- geometry helpers


def fiber_intervals(run: RunRecord, pieces: np.ndarray) -> list[tuple[Fraction, Fraction]]:
    N = run.depth
    return [run.tree.hull_flat(N, int(f)) for f in pieces]


def graph_segments(run: RunRecord):
    """Graph of h over the deepest pieces as horizontal segments (d = 1)."""
    from . import dimension

    if run.schedule.d != 1:
        raise PerturbError("graph segments need d = 1")
    lo, hi = run.tree.bounds_float(run.depth)
    return dimension.from_segments(lo, hi, run.values()[:, 0])


# ---------------------------------------------------------------- Chebyshev


def chebyshev_bound_mc(u: int, v: int, p, trials: int, seed: int) -> dict:
    """Monte Carlo of Pr(some symbol j <= v is seen fewer than u p / 2 times)."""
    p = q(p)
    if u < 1 or v < 1 or trials < 1:
        raise PerturbError("u, v and trials must be >= 1")
    if not 0 < p <= Fraction(1, v):
        raise PerturbError(f"p = {p} must lie in (0, 1/v]")
    gen = rng.generator(seed, "mc")
    probs = [float(p)] * v + [float(1 - v * p)]
    counts = gen.multinomial(u, probs, size=trials)
    fail = np.any(counts[:, :v] * 2 < u * p.numerator / p.denominator, axis=1)
    emp = float(fail.mean())
    return {
        "empirical": emp,
        "bound": float(Fraction(4 * v) / (u * p)),
        "sigma": math.sqrt(emp * (1 - emp) / trials),
        "trials": trials,
    }


# ---------------------------------------------------------------- JSON


def to_json(run: RunRecord) -> dict:
    N = run.depth
    levels = []
    for n, c in enumerate(run.coeffs, 1):
        levels.append([[f"{2 * int(v)}/2^{n}" for v in row] for row in c.tolist()])
    doc = {
        "schema": SCHEMA,
        "d": run.schedule.d,
        "seed": run.schedule.seed,
        "a": list(run.schedule.a),
        "tree": cantor.to_json(run.tree),
        "g": functions.to_json(run.g) if run.g.xs else None,
        "levels": levels,
        "balls": [
            {"k": b.k, "center": [qstr(v) for v in b.center], "radius": qstr(b.radius), "measure": qstr(b.measure), "chain": [[qstr(v) for v in y] for y in b.chain]}
            for b in run.balls
        ],
        "depth": N,
    }
    return doc


def _dyadic(s: str) -> Fraction:
    num, den = s.split("/")
    return Fraction(int(num), 2 ** int(den.split("^")[1]))


def from_json(doc: dict) -> RunRecord:
    if doc.get("schema") != SCHEMA:
        raise PerturbError(f"unsupported schema {doc.get('schema')!r}")
    tree = cantor.from_json(doc["tree"])
    d = doc["d"]
    g = functions.from_json(doc["g"]) if doc.get("g") else functions.zero(d)
    N = tree.depth
    coeffs = []
    h_int = np.zeros((tree.count(N), d), dtype=np.int64)
    for n, rows in enumerate(doc["levels"], 1):
        c = np.array([[int(_dyadic(v) * 2 ** (n - 1)) for v in row] for row in rows], dtype=np.int8)
        coeffs.append(c)
        anc = np.arange(tree.count(N), dtype=np.int64) // prod(tree.a[n:N])
        h_int += c[anc].astype(np.int64) << (N - n)
    lo, hi = tree.bounds_float(N)
    gm = np.asarray(g.values((lo + hi) / 2), dtype=float).reshape(len(lo), d)
    run = RunRecord(PerturbationSchedule(d, tuple(doc["a"]), doc["seed"]), tree, g, coeffs, h_int, gm)
    run.balls = [
        Ball(b["k"], tuple(q(v) for v in b["center"]), q(b["radius"]), q(b["measure"]), tuple(tuple(q(v) for v in y) for y in b["chain"]))
        for b in doc.get("balls", [])
    ]
    return run
