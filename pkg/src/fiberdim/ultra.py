"""Finite ultrametric trees and the order-preserving map onto [0, 1].

Leaves are addressed by tuples of child indices and ordered
lexicographically.  Two distinct leaves whose longest common prefix has
length ``n`` are at distance ``deltas[n]``.

The map ``h(x)`` is the mass of all leaves strictly before ``x``.  Each
leaf then owns the image interval ``[h(x), h(x) + m(x)]``, and a
subtree's leaves fill an interval whose length is the subtree mass.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import q, qstr

SCHEMA = "ultra/1"


class UltraError(ValueError):
    pass


@dataclass(frozen=True)
class UltrametricTree:
    addresses: tuple[tuple[int, ...], ...]
    masses: tuple[Fraction, ...]
    deltas: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.addresses:
            raise UltraError("a tree needs at least one leaf")
        if list(self.addresses) != sorted(self.addresses):
            raise UltraError("leaves must be listed in lexicographic order")
        if any(m <= 0 for m in self.masses):
            raise UltraError("leaf masses must be positive")
        if sum(self.masses) != 1:
            raise UltraError(f"leaf masses sum to {sum(self.masses)}, not 1")
        if any(b >= a for a, b in zip(self.deltas, self.deltas[1:])) or self.deltas[-1] <= 0:
            raise UltraError("diameters must be positive and strictly decreasing")
        if len(self.deltas) < self.depth:
            raise UltraError("need one diameter per level")
        for u, v in zip(self.addresses, self.addresses[1:]):
            if v[: len(u)] == u:
                raise UltraError(f"leaf {u} is an ancestor of {v}")

    @property
    def depth(self) -> int:
        return max(len(a) for a in self.addresses)

    @property
    def dyadic(self) -> bool:
        return all(d == Fraction(1, 2**n) for n, d in enumerate(self.deltas))

    def common(self, i: int, j: int) -> int:
        u, v = self.addresses[i], self.addresses[j]
        n = 0
        for x, y in zip(u, v):
            if x != y:
                break
            n += 1
        return n

    def distance(self, i: int, j: int) -> Fraction:
        return Fraction(0) if i == j else self.deltas[self.common(i, j)]

    def nodes(self) -> dict[tuple[int, ...], tuple[int, int]]:
        """Every node (as an address prefix) -> range of its leaf positions."""
        out: dict[tuple[int, ...], list[int]] = {}
        for pos, addr in enumerate(self.addresses):
            for n in range(len(addr) + 1):
                key = addr[:n]
                if key in out:
                    out[key][1] = pos
                else:
                    out[key] = [pos, pos]
        return {k: (v[0], v[1]) for k, v in out.items()}


def _default_deltas(depth: int) -> tuple[Fraction, ...]:
    return tuple(Fraction(1, 2**n) for n in range(depth + 1))


def from_nested(nested, deltas: Sequence | None = None) -> UltrametricTree:
    """Tree from nested lists whose innermost entries are leaf masses."""
    addrs, masses = [], []

    def walk(node, prefix):
        if isinstance(node, (list, tuple)):
            if not node:
                raise UltraError("empty node")
            for i, child in enumerate(node):
                walk(child, prefix + (i,))
        else:
            addrs.append(prefix)
            masses.append(q(node))

    walk(nested, ())
    depth = max(len(a) for a in addrs)
    dl = _default_deltas(depth) if deltas is None else tuple(q(d) for d in deltas)
    return UltrametricTree(tuple(addrs), tuple(masses), dl)


def weighted(child_weights: Sequence, depth: int, deltas: Sequence | None = None) -> UltrametricTree:
    """Every node splits its mass among children in the given proportions."""
    w = [q(x) for x in child_weights]
    if sum(w) != 1:
        raise UltraError("child weights must sum to 1")
    addrs = list(itertools.product(range(len(w)), repeat=depth))
    masses = [math.prod((w[i] for i in a), start=Fraction(1)) for a in addrs]
    dl = _default_deltas(depth) if deltas is None else tuple(q(d) for d in deltas)
    return UltrametricTree(tuple(addrs), tuple(masses), dl)


def uniform(b: int, depth: int, deltas: Sequence | None = None) -> UltrametricTree:
    return weighted([Fraction(1, b)] * b, depth, deltas)


def to_nested(tree: UltrametricTree):
    root: list = []
    for addr, m in zip(tree.addresses, tree.masses):
        node = root
        for k, i in enumerate(addr):
            while len(node) <= i:
                node.append([])
            if k == len(addr) - 1:
                node[i] = qstr(m)
            else:
                node = node[i]
    return root if tree.addresses[0] else qstr(tree.masses[0])


def to_json(tree: UltrametricTree) -> dict:
    return {"schema": SCHEMA, "deltas": [qstr(d) for d in tree.deltas], "tree": to_nested(tree)}


def from_json(doc: dict) -> UltrametricTree:
    if doc.get("schema") != SCHEMA:
        raise UltraError(f"unsupported schema {doc.get('schema')!r}")
    return from_nested(doc["tree"], doc["deltas"])


# ---------------------------------------------------------------- the map


def monotone_map(tree: UltrametricTree) -> list[Fraction]:
    out, acc = [], Fraction(0)
    for m in tree.masses:
        out.append(acc)
        acc += m
    return out


def pushforward_check(tree: UltrametricTree) -> list[dict]:
    h = monotone_map(tree)
    rows = []
    for node, (i, j) in sorted(tree.nodes().items()):
        lo, hi = h[i], h[j] + tree.masses[j]
        mass = sum(tree.masses[i : j + 1])
        rows.append({"node": node, "interval": (lo, hi), "mass": mass, "ok": hi - lo == mass})
    return rows


def check_one_monotone(tree: UltrametricTree) -> bool:
    """diam of every order interval [a, b] equals d(a, b)."""
    n = len(tree.addresses)
    step = [tree.distance(k, k + 1) for k in range(n - 1)]
    for i in range(n):
        diam = Fraction(0)
        for j in range(i + 1, n):
            diam = max(diam, step[j - 1])
            if diam != tree.distance(i, j):
                return False
    return True


def check_balls(tree: UltrametricTree) -> bool:
    """Balls of radius delta_n are either disjoint or equal; ultrametric inequality."""
    n = len(tree.addresses)
    for r in tree.deltas:
        balls = [frozenset(j for j in range(n) if tree.distance(i, j) <= r) for i in range(n)]
        for x, y in itertools.combinations(set(balls), 2):
            if x & y:
                return False
    for i, j, k in itertools.combinations(range(n), 3):
        d = (tree.distance(i, j), tree.distance(j, k), tree.distance(i, k))
        if max(d) > sorted(d)[1]:
            return False
    return True


@dataclass
class HolderProfile:
    exponents: np.ndarray  # one per tested pair, log(dh) / log(d)
    pairs: np.ndarray  # (k, 2) leaf positions
    min_exponent: float | None
    min_increment: Fraction | None  # dh of the extremal pair
    min_distance: Fraction | None


def holder_profile(tree: UltrametricTree, max_pairs: int = 4_000_000, seed: int = 0) -> HolderProfile:
    """Exponents log|dh| / log d(x, z) over leaf pairs at distance < 1.

    The increment of a pair ``x < z`` is the length of the hull of their
    image intervals, ``h(z) + m(z) - h(x)``.  The minimum is found exactly
    from the nodes: within a node the extremal pair runs from its first to
    its last leaf, with increment equal to the node mass.
    """
    n = len(tree.addresses)
    h = monotone_map(tree)
    if n < 2:
        return HolderProfile(np.zeros(0), np.zeros((0, 2), dtype=int), None, None, None)
    hf = np.array([float(x) for x in h])
    mf = np.array([float(x) for x in tree.masses])
    depth = tree.depth
    A = np.full((n, depth), -1, dtype=np.int64)
    for k, addr in enumerate(tree.addresses):
        A[k, : len(addr)] = addr
    if n * (n - 1) // 2 <= max_pairs:
        I, J = np.triu_indices(n, 1)
    else:
        from . import rng

        g = rng.generator(seed, "holder")
        I = g.integers(0, n, max_pairs)
        J = g.integers(0, n, max_pairs)
        keep = I != J
        I, J = np.minimum(I, J)[keep], np.maximum(I, J)[keep]
    same = A[I] == A[J]
    cp = np.where(same.all(axis=1), depth, np.argmin(same, axis=1))
    dl = np.array([float(d) for d in tree.deltas])
    dist = dl[cp]
    inc = hf[J] + mf[J] - hf[I]
    ok = dist < 1
    with np.errstate(divide="ignore"):
        ex = np.log(inc[ok]) / np.log(dist[ok])
    pairs = np.stack([I[ok], J[ok]], axis=1)

    best = None
    for node, (i, j) in tree.nodes().items():
        if i == j or tree.deltas[len(node)] >= 1:
            continue
        # the node must have at least two children for a pair to separate at it
        if tree.addresses[i][len(node)] == tree.addresses[j][len(node)]:
            continue
        cand = (sum(tree.masses[i : j + 1]), len(node))
        if best is None or _less(tree, cand, best):
            best = cand
    if best is None:
        return HolderProfile(ex, pairs, None, None, None)
    mass, lvl = best
    d = tree.deltas[lvl]
    return HolderProfile(ex, pairs, math.log(mass) / math.log(d), mass, d)


def _less(tree, a, b) -> bool:
    """Exact comparison of log(m_a)/log(d_a) < log(m_b)/log(d_b) for dyadic diameters."""
    (ma, la), (mb, lb) = a, b
    if tree.dyadic:
        # log2(1/ma)/la < log2(1/mb)/lb  <=>  (1/ma)**lb < (1/mb)**la
        return (1 / ma) ** lb < (1 / mb) ** la
    da, db = tree.deltas[la], tree.deltas[lb]
    return math.log(ma) / math.log(da) < math.log(mb) / math.log(db)
