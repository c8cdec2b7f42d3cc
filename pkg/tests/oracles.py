"""Independent reference computations used to pin package outputs.

Nothing here imports the package; each oracle rebuilds its quantity from
first principles with plain integers, Fractions or brute force.
"""

from fractions import Fraction
from itertools import product
import math

import numpy as np


def fat_cantor_hulls(a, eps):
    """Stage-by-stage removal: each interval loses eps / (2^n * pieces) as a_n - 1 equal gaps."""
    levels = [[(Fraction(0), Fraction(1))]]
    for n, an in enumerate(a, 1):
        cur = levels[-1]
        budget = eps / (2**n * len(cur))
        nxt = []
        for lo, hi in cur:
            if an == 1:
                nxt.append((lo + budget / 2, hi - budget / 2))
                continue
            L = (hi - lo - budget) / an
            gap = budget / (an - 1)
            nxt.extend((lo + i * (L + gap), lo + i * (L + gap) + L) for i in range(an))
        levels.append(nxt)
    return levels


def limit_piece_measure(a, eps, n, hull_len):
    """Lebesgue measure of K inside one level-n piece: hull minus all later removals."""
    return hull_len - eps / 2**n / math.prod(a[:n])


def triadic_counts(depth, ks):
    """Cells [j 3^-k, (j+1) 3^-k) met by the level-`depth` triadic intervals (right ends excluded)."""
    lefts = [sum(d * 3 ** (depth - i - 1) for i, d in enumerate(ds)) for ds in product((0, 2), repeat=depth)]
    out = []
    for k in ks:
        m = 3 ** (depth - k)
        cells = set()
        for l in lefts:
            cells.update(range(l // m, -(-(l + 1) // m)))
        out.append(len(cells))
    return out


def ols_slope(scales, counts):
    x = np.log(1 / np.asarray(scales, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def window_sup(hulls, scale, exponent):
    """Brute force sup over leaf windows [lo_i, hi_j] of ((j - i + 1)/n) / diam^exponent."""
    n = len(hulls)
    lo = np.array([float(x) for x, _ in hulls]) * scale
    hi = np.array([float(y) for _, y in hulls]) * scale
    I, J = np.triu_indices(n)
    return float((((J - I + 1) / n) / (hi[J] - lo[I]) ** exponent).max())


def sawtooth_direct(a, m, x):
    """G_m(x) summed tooth by tooth in Fractions."""
    total = Fraction(0)
    for n in range(1, m + 1):
        u = x * math.prod(a[:n])
        i = math.floor(u)
        t = u - i
        total += (1 if i % 2 == 0 else -1) * (1 - 2 * t) / 2**n
    return total


def staircase_value(alpha, x):
    """Brute force g on [0,1]: value of the largest z-point (any prefix length) not exceeding x, else 0."""
    N = len(alpha)
    best_z, best_v = None, Fraction(0)
    for signs in (s for n in range(1, N + 1) for s in product((-1, 1), repeat=n)):
        z = Fraction(1, 2) + sum(s * al for s, al in zip(signs, alpha))
        v = Fraction(1, 2) + sum(Fraction(s, 2 ** (k + 2)) for k, s in enumerate(signs))
        if z <= x and (best_z is None or z > best_z):
            best_z, best_v = z, v
    return best_v


def total_variation(ys):
    return sum((abs(b - a) for a, b in zip(ys, ys[1:])), Fraction(0))


def max_slope(xs, ys):
    return max(abs((y1 - y0) / (x1 - x0)) for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:]))


def ultra_intervals(weights, depth):
    """Leaf masses of the weighted tree and the image interval of every node address."""
    masses = {}
    for addr in product(range(len(weights)), repeat=depth):
        masses[addr] = math.prod((weights[i] for i in addr), start=Fraction(1))
    leaves = sorted(masses)
    out = {}
    for n in range(depth + 1):
        for node in product(range(len(weights)), repeat=n):
            inside = [l for l in leaves if l[:n] == node]
            start = sum((masses[l] for l in leaves if l < inside[0]), Fraction(0))
            out[node] = (start, start + sum(masses[l] for l in inside))
    return out
