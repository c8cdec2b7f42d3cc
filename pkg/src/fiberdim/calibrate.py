"""Scale windows and thresholds for the property-based perturbation checks.

The windows are chosen once by a pilot at a smaller depth and then
frozen in ``data/pilot_thresholds.json``; later runs only read them.

Window rules are relative to the run depth N:

* fiber counts use cells of side a^-k for k in [k_lo, N + k_hi_offset],
  where a is the (uniform) branching of the tree;
* graph counts use cells of side 2^-k for k in [k_lo, N + k_hi_offset].
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

from . import cantor, dimension, perturb

DEFAULT_PATH = Path(__file__).with_name("data") / "pilot_thresholds.json"

FIBER_RULES = [{"k_lo": lo, "k_hi_offset": off} for lo in (1, 2) for off in (-1, 0, 1, 2)]
GRAPH_RULES = [{"k_lo": lo, "k_hi_offset": off} for lo in (0, 1) for off in (-3, -2, -1)]
BIN_CHOICES = [16, 32, 64]


def _branching(tree: cantor.CantorTree) -> int:
    if len(set(tree.a)) != 1:
        raise ValueError("fiber windows need a uniform branching")
    return tree.a[0]


def fiber_scales(tree: cantor.CantorTree, rule: dict) -> list[Fraction]:
    a = _branching(tree)
    return [Fraction(1, 2 * a**k) for k in range(rule["k_lo"], tree.depth + rule["k_hi_offset"] + 1)]


def graph_scales(depth: int, rule: dict) -> list[Fraction]:
    return [Fraction(1, 2 ** (k + 1)) for k in range(rule["k_lo"], depth + rule["k_hi_offset"] + 1)]


def fiber_fit(run: perturb.RunRecord, rule: dict) -> dimension.DimensionFit:
    """Box-fit of the level set at the modal value of h (default tolerance)."""
    y = perturb.modal_value(run)
    pieces = perturb.level_set(run, y)
    ps = dimension.from_intervals(perturb.fiber_intervals(run, pieces))
    return dimension.fit_dimension(ps, fiber_scales(run.tree, rule), label="level-set box slope")


def graph_fit(run: perturb.RunRecord, rule: dict) -> dimension.DimensionFit:
    g = perturb.graph_segments(run)
    return dimension.fit_dimension(g, graph_scales(run.depth, rule), label="graph upper-box estimate")


def occupation_fraction(run: perturb.RunRecord, bins: int, density: float) -> Fraction:
    return perturb.occupation_histogram(run, bins).fraction_below(density)


def _runs(a: int, epsilon: Fraction, depth: int, seeds: Iterable[int]) -> list[perturb.RunRecord]:
    tree = cantor.build_fat_cantor((a,) * depth, epsilon, depth)
    return [perturb.sample_run(tree, 1, None, s) for s in seeds]


def run_pilot(depth: int = 5, seeds: Iterable[int] = range(20), a: int = 6, epsilon=Fraction(1, 2), fiber_min: float = 0.75, graph_range=(1.6, 2.0), mass_min: float = 0.9, density: float = 4.0) -> dict:
    """Evaluate every candidate rule on pilot runs and pick the best of each kind.

    Rules are ranked by the share of seeds meeting the target, then by the
    number of scales, then by the order they are listed in.
    """
    seeds = list(seeds)
    runs = _runs(a, Fraction(epsilon), depth, seeds)
    table = {"fiber": [], "graph": [], "bins": []}
    for rule in FIBER_RULES:
        slopes = [fiber_fit(r, rule).slope for r in runs]
        n = len(fiber_scales(runs[0].tree, rule))
        table["fiber"].append({"rule": rule, "scales": n, "slopes": slopes, "pass_rate": float(np.mean([s >= fiber_min for s in slopes]))})
    for rule in GRAPH_RULES:
        n = len(graph_scales(depth, rule))
        if n < 3:
            continue
        slopes = [graph_fit(r, rule).slope for r in runs]
        table["graph"].append({"rule": rule, "scales": n, "slopes": slopes, "pass_rate": float(np.mean([graph_range[0] <= s <= graph_range[1] for s in slopes]))})
    for bins in BIN_CHOICES:
        fr = [float(occupation_fraction(r, bins, density)) for r in runs]
        table["bins"].append({"bins": bins, "fractions": fr, "pass_rate": float(np.mean([f >= mass_min for f in fr]))})

    def pick(rows):
        return max(enumerate(rows), key=lambda t: (t[1]["pass_rate"], t[1]["scales"], -t[0]))[1]

    fiber = pick(table["fiber"])
    graph = pick(table["graph"])
    passing = [r for r in table["bins"] if r["pass_rate"] >= 0.8]
    bins = max(passing, key=lambda r: r["bins"]) if passing else max(table["bins"], key=lambda r: r["pass_rate"])
    return {
        "pilot": {"depth": depth, "seeds": seeds, "a": a, "epsilon": str(Fraction(epsilon))},
        "targets": {"fiber_min": fiber_min, "graph_range": list(graph_range), "mass_min": mass_min, "density": density, "seed_fraction": 0.8},
        "fiber_window": fiber["rule"],
        "graph_window": graph["rule"],
        "bins": bins["bins"],
        "candidates": table,
    }


def load(path: str | Path | None = None) -> dict:
    with open(path or DEFAULT_PATH, encoding="utf-8") as fh:
        return json.load(fh)


def seed_pass_rate(values: Iterable[bool]) -> float:
    v = list(values)
    return sum(v) / len(v) if v else math.nan
