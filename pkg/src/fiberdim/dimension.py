"""Box counting, log-log fits and mass-distribution lower bounds.

Box counts use axis-aligned cells of side ``2 * delta`` anchored at
``anchor``.  A cell counts for an interval union when it overlaps the set
in positive length or holds one of its isolated points.  Point clouds use
half-open cells.  Graphs of piecewise-constant maps are stored as
horizontal segments and counted exactly per row of cells.

Packing dimension is only ever estimated through the upper-box slope, and
outputs say so.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cantor import CantorTree, MassDistribution, SubsetTree, _Leaves, power_le, scan_windows
from .exact import IntervalUnion, q
from .functions import GridFunction

EMPTY_DIMENSION = -1.0


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class PointSet:
    ambient: int
    union: IntervalUnion | None = None
    cloud: np.ndarray | None = None  # (n, ambient)
    segments: np.ndarray | None = None  # (n, 3): x0, x1, y of horizontal pieces

    @property
    def empty(self) -> bool:
        if self.union is not None:
            return self.union.is_empty()
        arr = self.cloud if self.cloud is not None else self.segments
        return arr is None or len(arr) == 0


def from_union(u: IntervalUnion) -> PointSet:
    return PointSet(1, union=u)


def from_intervals(intervals) -> PointSet:
    return PointSet(1, union=IntervalUnion.of(intervals))


def from_tree(tree: CantorTree | SubsetTree, level: int | None = None) -> PointSet:
    """The union of level pieces (deepest by default) as an exact set."""
    if isinstance(tree, SubsetTree):
        n = tree.depth if level is None else level
        return from_intervals(tree.hulls(n))
    n = tree.depth if level is None else level
    lo, hi = tree.bounds(n)
    return from_intervals(zip(lo, hi))


def from_cloud(points) -> PointSet:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if not np.all(np.isfinite(arr)):
        raise DimensionError("point clouds must be finite")
    return PointSet(arr.shape[1], cloud=arr)


def from_segments(x0, x1, y) -> PointSet:
    seg = np.stack([np.asarray(x0, float), np.asarray(x1, float), np.asarray(y, float)], axis=1)
    return PointSet(2, segments=seg)


def _union_count(u: IntervalUnion, delta: Fraction, anchor: Fraction) -> int:
    w = 2 * delta
    ranges = []
    for lo, hi in u:
        a = (lo - anchor) / w
        if lo == hi:
            k = math.floor(a)
            ranges.append((k, k))
        else:
            ranges.append((math.floor(a), math.ceil((hi - anchor) / w) - 1))
    ranges.sort()
    total, cur_lo, cur_hi = 0, None, None
    for a, b in ranges:
        if cur_hi is None or a > cur_hi + 1:
            if cur_hi is not None:
                total += cur_hi - cur_lo + 1
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    if cur_hi is not None:
        total += cur_hi - cur_lo + 1
    return total


def _segment_count(seg: np.ndarray, w: float, anchor: float) -> int:
    x0 = np.floor((seg[:, 0] - anchor) / w).astype(np.int64)
    x1 = np.ceil((seg[:, 1] - anchor) / w).astype(np.int64) - 1
    x1 = np.maximum(x1, x0)
    row = np.floor((seg[:, 2] - anchor) / w).astype(np.int64)
    order = np.lexsort((x0, row))
    row, x0, x1 = row[order], x0[order], x1[order]
    total = 0
    start = np.r_[0, np.nonzero(np.diff(row))[0] + 1, len(row)]
    for s, e in zip(start[:-1], start[1:]):
        a, b = x0[s:e], x1[s:e]
        reach = np.maximum.accumulate(b)
        new = np.r_[True, a[1:] > reach[:-1]]
        # cells covered = sum over merged runs
        run_id = np.cumsum(new) - 1
        lo = a[new]
        hi = np.zeros(len(lo), dtype=np.int64)
        np.maximum.at(hi, run_id, b)
        total += int(np.sum(hi - lo + 1))
    return total


def box_count(s: PointSet, delta, anchor=0) -> int:
    """Number of cells of side 2*delta meeting the set."""
    if s.empty:
        return 0
    if s.union is not None:
        d = q(delta)
        if d <= 0:
            raise DimensionError("delta must be positive")
        return _union_count(s.union, d, q(anchor))
    d = float(delta)
    if d <= 0:
        raise DimensionError("delta must be positive")
    w = 2 * d
    if s.segments is not None:
        return _segment_count(s.segments, w, float(anchor))
    cells = np.floor((s.cloud - float(anchor)) / w).astype(np.int64)
    return len(np.unique(cells, axis=0))


@dataclass
class DimensionFit:
    scales: list[float]
    counts: list[float]
    slope: float
    intercept: float
    r2: float
    window: tuple[float, float]
    label: str = "box-counting slope"
    empty: bool = False

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [(d, c, math.log(1 / d), math.log(c) if c > 0 else float("-inf")) for d, c in zip(self.scales, self.counts)]


def fit_counts(scales: Sequence, counts: Sequence, label: str = "box-counting slope") -> DimensionFit:
    """Least squares of log N against log(1/delta) over the given scales."""
    pairs = sorted(((float(d), float(c)) for d, c in zip(scales, counts)), reverse=True)
    use = [(d, c) for d, c in pairs if c > 0 and d > 0]
    if len(use) < 3:
        raise DimensionError(f"need at least 3 usable scales, got {len(use)}")
    x = np.array([math.log(1 / d) for d, _ in use])
    y = np.array([math.log(c) for _, c in use])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if sst == 0 else max(0.0, min(1.0, 1 - float(np.sum(resid**2)) / sst))
    return DimensionFit([d for d, _ in use], [c for _, c in use], float(slope), float(intercept), r2, (use[0][0], use[-1][0]), label)


def fit_dimension(s: PointSet, scales: Sequence, anchor=0, label: str = "box-counting slope") -> DimensionFit:
    if s.empty:
        sc = sorted((float(d) for d in scales), reverse=True)
        return DimensionFit(sc, [0.0] * len(sc), EMPTY_DIMENSION, 0.0, 1.0, (sc[0], sc[-1]) if sc else (0.0, 0.0), label, True)
    counts = [box_count(s, d, anchor) for d in scales]
    return fit_counts([float(d) for d in scales], counts, label)


def dyadic_scales(k0: int, k1: int) -> list[Fraction]:
    """delta = 2^-(k+1) for k = k0..k1, so cells have side 2^-k."""
    return [Fraction(1, 2 ** (k + 1)) for k in range(k0, k1 + 1)]


def ternary_scales(k0: int, k1: int) -> list[Fraction]:
    """delta = 3^-k / 2 for k = k0..k1, so cells have side 3^-k."""
    return [Fraction(1, 2 * 3**k) for k in range(k0, k1 + 1)]


# ---------------------------------------------------------------- lower bounds


@dataclass
class LowerBound:
    certified: float | None  # largest certified s, None if none was
    c: Fraction
    rows: list[dict] = field(default_factory=list)  # per s: sup ratio, pass


def hausdorff_lower_bound(mass: MassDistribution, s_grid: Sequence[float], max_windows: int = 50_000_000, c=4) -> LowerBound:
    """Largest s in the grid with sup mu(B)/diam(B)^s <= c over all aligned windows.

    Diameters are normalised by the ambient measure as in the mass-bound
    scan.  The float sup is confirmed exactly on every window within 1e-9
    of c, with s rounded to a nearby rational on the safe side.
    """
    c = q(c)
    leaves = _Leaves(mass)
    n = len(leaves.lo)
    if n * (n + 1) // 2 > max_windows:
        raise DimensionError(f"{n} leaves give more than {max_windows} windows")
    rows = []
    best = None
    for s in sorted(float(v) for v in s_grid):
        if s < 0:
            raise DimensionError("s must be non-negative")
        scan = scan_windows(leaves, lambda m, d, s=s: m / d**s, None, near_level=float(c))
        ok = scan.best <= float(c) * (1 + 1e-9)
        if ok:
            up = Fraction(math.ceil(s * 1000), 1000)
            down = Fraction(math.floor(s * 1000), 1000)
            for (x0, x1), mw in [((scan.window[0], scan.window[1]), scan.mass)] + scan.near:
                d = x1 - x0
                if d == 0:
                    continue
                ok = ok and power_le(mw, d, c, up if d <= 1 else down)
        rows.append({"s": s, "sup_ratio": scan.best, "pass": bool(ok), "windows": scan.tested})
        if ok:
            best = s
    return LowerBound(best, c, rows)


# ---------------------------------------------------------------- graphs


def graph_points(f: GridFunction, spacing: float | None = None) -> PointSet:
    """Graph of f as a point cloud in R^(1+d).

    Breakpoints are always included.  With ``spacing`` the affine pieces
    are filled in so consecutive points are at most that far apart in x.
    Piecewise-constant maps on a single coordinate come back as exact
    horizontal segments instead.
    """
    if not f.xs:
        if spacing is None:
            raise DimensionError("lazily evaluated functions need a sampling spacing")
        xs = np.linspace(0.0, 1.0, int(math.ceil(1 / spacing)) + 1)
    elif f.kind == "constant" and f.d == 1:
        x = np.array([float(v) for v in f.xs])
        return from_segments(x[:-1], x[1:], np.array([float(v) for v in f.ys]))
    else:
        xb = np.array([float(v) for v in f.xs])
        if spacing is None:
            xs = xb
        else:
            parts = [np.linspace(a, b, max(2, int(math.ceil((b - a) / spacing)) + 1))[:-1] for a, b in zip(xb[:-1], xb[1:])]
            xs = np.concatenate(parts + [xb[-1:]])
    ys = np.asarray(f.values(xs), dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    return from_cloud(np.concatenate([xs[:, None], ys], axis=1))


@dataclass
class IndicatrixCheck:
    total_variation: Fraction
    lipschitz: Fraction
    domain: Fraction
    passed: bool
    equality: bool


def banach_indicatrix_check(f: GridFunction) -> IndicatrixCheck:
    """Integral of #f^-1(y) dy, i.e. the total variation, against Lip(f) |domain|."""
    if f.d != 1:
        raise DimensionError("the indicatrix check needs a real-valued function")
    if f.kind != "linear" or not f.xs:
        raise DimensionError("the indicatrix check needs explicit piecewise-linear breakpoints")
    tv = sum((abs(b - a) for a, b in zip(f.ys, f.ys[1:])), Fraction(0))
    lip = f.lipschitz()
    dom = f.xs[-1] - f.xs[0]
    return IndicatrixCheck(tv, lip, dom, tv <= lip * dom, tv == lip * dom)


# ---------------------------------------------------------------- output


def fit_csv(fit: DimensionFit) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "count", "log_inv_delta", "log_count"])
    for row in fit.rows():
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def fit_json(fit: DimensionFit) -> dict:
    return {
        "label": fit.label,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r2": fit.r2,
        "window": list(fit.window),
        "scales": fit.scales,
        "counts": fit.counts,
        "empty": fit.empty,
    }


def loglog_svg(fit: DimensionFit, title: str = "") -> str:
    """Static log-log chart of the counts with the fitted line, as SVG text."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "fiberdim"
    fig, ax = plt.subplots(figsize=(5, 4))
    x = np.array([math.log(1 / d) for d in fit.scales])
    y = np.array([math.log(c) if c > 0 else np.nan for c in fit.counts])
    ax.plot(x, y, "o", label="log N")
    if not fit.empty:
        ax.plot(x, fit.slope * x + fit.intercept, "-", label=f"slope {fit.slope:.4f}")
    ax.set_xlabel("log(1/delta)")
    ax.set_ylabel("log N(delta)")
    if title:
        ax.set_title(title)
    ax.legend()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
