"""Command line runner: one configured experiment per invocation.

    fiberdim run config.json [--out DIR]
    fiberdim --list
    fiberdim --validate config.json

A config is a JSON object ``{"experiment": NAME, "params": {...}}``.
Each run writes ``result.json``, ``data.csv`` and ``plot.svg`` atomically.
Exit status: 0 when the experiment's checks pass, 1 when they fail, 2 on a
usage or config error.  ``NO_PARALLEL=1`` runs multi-seed experiments
serially; results are identical either way.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import __version__, calibrate, cantor, construct, dimension, functions, gauge, perturb, rng, ultra
from .exact import prod, q, qstr


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


REQUIRED = object()


# ---------------------------------------------------------------- param kinds


def _int(key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return v


def _pos_int(key, v):
    v = _int(key, v)
    if v < 1:
        raise ConfigError(key, "must be >= 1")
    return v


def _rational(key, v):
    if isinstance(v, bool):
        raise ConfigError(key, "expected a number")
    try:
        return q(v)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(key, f"expected a rational such as \"1/4\", got {v!r}")


def _float(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    try:
        return float(Fraction(v)) if isinstance(v, str) else float(v)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {v!r}")


def _list(kind):
    def check(key, v):
        if not isinstance(v, list) or not v:
            raise ConfigError(key, "expected a non-empty list")
        return [kind(f"{key}[{i}]", x) for i, x in enumerate(v)]

    return check


def _bool(key, v):
    if not isinstance(v, bool):
        raise ConfigError(key, "expected true or false")
    return v


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigError(key, f"expected one of {list(options)}, got {v!r}")
        return v

    return check


def _obj(key, v):
    if not isinstance(v, dict):
        raise ConfigError(key, "expected an object")
    return v


def _modulus(key, v):
    v = _obj(key, v)
    fam = v.get("family")
    if fam not in ("linear", "hoelder"):
        raise ConfigError(f"{key}.family", "expected \"linear\" or \"hoelder\"")
    try:
        return construct.Modulus(fam, _rational(f"{key}.c", v.get("c", 1)), _rational(f"{key}.alpha", v.get("alpha", 1)))
    except construct.ConstructError as e:
        raise ConfigError(key, str(e))


def _gauge(key, v):
    try:
        return gauge.from_json(_obj(key, v))
    except (KeyError, gauge.GaugeError, ValueError) as e:
        raise ConfigError(key, f"bad gauge: {e}")


def _cap(key, v):
    if v is None or v == "auto":
        return v
    return _rational(key, v)


def _window(key, v):
    v = _obj(key, v)
    return {"k_lo": _int(f"{key}.k_lo", v.get("k_lo")), "k_hi_offset": _int(f"{key}.k_hi_offset", v.get("k_hi_offset"))}


# ---------------------------------------------------------------- results


@dataclass
class Outcome:
    passed: bool
    summary: dict
    header: list[str]
    rows: list[list]
    plot: dict
    hypotheses: dict = field(default_factory=dict)
    extra_files: dict[str, str] = field(default_factory=dict)


def _jsonable(x):
    if isinstance(x, Fraction):
        return qstr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, construct.Modulus):
        return construct.modulus_json(x)
    if isinstance(x, gauge.Gauge):
        return gauge.to_json(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _cell(v) -> str:
    if isinstance(v, Fraction):
        return qstr(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _svg(plot: dict) -> str:
    if plot.get("type") == "loglog":
        return dimension.loglog_svg(plot["fit"], plot.get("title", ""))
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "fiberdim"
    fig, ax = plt.subplots(figsize=(5, 4))
    for s in plot.get("series", []):
        ax.plot(s["x"], s["y"], s.get("style", "o-"), label=s.get("label"))
    if plot.get("logy"):
        ax.set_yscale("log")
    if plot.get("logx"):
        ax.set_xscale("log")
    ax.set_xlabel(plot.get("xlabel", ""))
    ax.set_ylabel(plot.get("ylabel", ""))
    ax.set_title(plot.get("title", ""))
    if any(s.get("label") for s in plot.get("series", [])):
        ax.legend()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parallel_map(fn: Callable, items) -> list:
    items = list(items)
    if os.environ.get("NO_PARALLEL") == "1" or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- experiments


def _pilot() -> dict:
    return calibrate.load()


def _fat_tree(p) -> cantor.CantorTree:
    return cantor.build_fat_cantor(p["a"], p["epsilon"], len(p["a"]))


def _seeds(p) -> list[int]:
    return p["seeds"] if p.get("seeds") else [p["seed"]]


def exp_triadic_dim(p) -> Outcome:
    if p["set"] == "triadic":
        tree = cantor.triadic_subset(p["depth"]).parent
        target = p["target"] if p["target"] is not None else math.log(2) / math.log(3)
        ps = dimension.from_tree(cantor.triadic_subset(p["depth"]))
    else:
        tree = cantor.prescribed_dimension_cantor(p["s"], p["depth"])
        target = p["target"] if p["target"] is not None else p["s"]
        ps = dimension.from_tree(tree)
    scales = [tree.lengths[k] / 2 for k in range(p["k_lo"], p["k_hi"] + 1)]
    fit = dimension.fit_dimension(ps, scales)
    ok = abs(fit.slope - target) <= p["tolerance"]
    summary = {"slope": fit.slope, "r2": fit.r2, "target": target, "tolerance": p["tolerance"], "window": list(fit.window)}
    return Outcome(ok, summary, ["delta", "count", "log_inv_delta", "log_count"], [list(r) for r in fit.rows()], {"type": "loglog", "fit": fit, "title": p["set"]})


def exp_fat_cantor_build(p) -> Outcome:
    a, eps, depth = p["a"], p["epsilon"], p["depth"] or len(p["a"])
    tree = cantor.build_fat_cantor(a, eps, depth)
    rows, ok = [], True
    for n in range(1, depth + 1):
        P = prod(a[:n])
        lo, hi = tree.bounds(n)
        L = (1 - eps + eps / 2**n) / P
        hull_ok = all(h - l == L for l, h in zip(lo, hi))
        disjoint = all(h < l2 for h, l2 in zip(hi, lo[1:]))
        pm = tree.piece_measure(n)
        level_sum = pm * tree.count(n)
        # descendants at the deepest level, summed per level-n piece, shrink to the limit measure
        tail = tree.lengths[depth] * prod(a[n:depth]) - (1 - eps) / P
        identities = pm == (1 - eps) / P and level_sum == 1 - eps and tail == eps / 2**depth / P
        ok = ok and hull_ok and disjoint and identities
        rows.append([n, tree.count(n), L, pm, level_sum, hull_ok and disjoint and identities])
    summary = {"total_measure": tree.total_measure, "levels": depth, "identities_hold": ok}
    series = [{"x": [r[0] for r in rows], "y": [float(r[2]) for r in rows], "label": "hull length"}, {"x": [r[0] for r in rows], "y": [float(r[3]) for r in rows], "label": "piece measure"}]
    return Outcome(ok, summary, ["n", "count", "hull_length", "piece_measure", "level_sum", "ok"], rows, {"series": series, "logy": True, "xlabel": "level", "ylabel": "length"})


def exp_mass_bound(p) -> Outcome:
    a, b = p["a"], p["b"]
    if len(a) != len(b):
        raise ConfigError("b", "must have the same length as a")
    tree = cantor.tiling_tree(a, len(a)) if p["kind"] == "tiling" else cantor.build_fat_cantor(a, p["epsilon"], len(a))
    sub = cantor.select_subset(tree, b, p["selector"], seed=p["seed"])
    mass = cantor.natural_measure(sub)
    k = p["k"] or len(a)
    rep = cantor.verify_mass_bound(mass, k, cap=p["cap"], c=p["c"])
    summary = {
        "sup_ratio": rep.sup_ratio,
        "passed": rep.passed,
        "window": list(rep.window),
        "window_mass": rep.window_mass,
        "window_diam": rep.window_diam,
        "exponent": rep.exponent,
        "cap": rep.cap,
        "windows_tested": rep.windows_tested,
        "leaves": len(sub.leaves()),
    }
    ratio = cantor.check_ratio_condition(a, b, len(a))
    hyp = {"ratio_condition": [{"n": r["n"], "holds": r["holds"]} for r in ratio]}
    rows = [[k, rep.sup_ratio, rep.window[0], rep.window[1], rep.window_mass, rep.window_diam, rep.windows_tested, rep.passed]]
    series = [{"x": [float(rep.window_diam)], "y": [rep.sup_ratio], "label": "sup ratio"}, {"x": [float(rep.window_diam)], "y": [float(p["c"])], "style": "r_", "label": "c"}]
    return Outcome(rep.passed, summary, ["k", "sup_ratio", "window_lo", "window_hi", "mass", "diam", "windows", "pass"], rows, {"series": series, "xlabel": "window diameter", "ylabel": "mu(B)/diam^beta"}, hyp)


def _run_invariants(run: perturb.RunRecord) -> dict:
    N = run.depth
    amp = [bool(np.abs(c).max() <= 1) for c in run.coeffs]
    tail_ok = True
    for Np in range(1, N + 1):
        # h - (f_1 + ... + f_N') in units 2^(1-N), against the bound 2^(1-N') = 2^(N-N') units
        diff = run.h_int - run.partial_int(Np) * 2 ** (N - Np)
        tail_ok = tail_ok and int(np.abs(diff).max()) <= 2 ** (N - Np)
    return {"amplitude": amp, "tail": tail_ok}


def _hyp_perturb(a, d) -> dict:
    s = 2**d
    rows = []
    for n, an in enumerate(a, 1):
        ps = perturb.paper_schedule(d, n)
        log_an = math.log(an) / math.log(2 * s)
        rows.append({"n": n, "a_n": an, "meets_schedule_a_n": log_an >= ps["log_base_a"], "schedule_growth_holds": ps["growth_holds"]})
    return {"paper_schedule": rows}


def exp_perturbation_run(p) -> Outcome:
    tree = _fat_tree(p)
    run = perturb.sample_run(tree, p["d"], None, p["seed"])
    inv = _run_invariants(run)
    H = perturb.occupation_histogram(run, p["bins"] or _pilot()["bins"])
    conserved = sum(H.masses.values(), Fraction(0)) + H.outside_mass == tree.total_measure
    ok = all(inv["amplitude"]) and inv["tail"] and conserved
    rows = [[n, 1 if np.any(c) else 0, int(np.abs(c).max()), Fraction(2, 2**n), Fraction(2, 2**n) * int(np.abs(c).max()) <= Fraction(2, 2**n)] for n, c in enumerate(run.coeffs, 1)]
    summary = {"digest": run.digest(), "amplitude_ok": all(inv["amplitude"]), "tail_ok": inv["tail"], "occupation_conserved": conserved, "max_density": H.max_density, "lambda_K": tree.total_measure}
    out = Outcome(ok, summary, ["n", "nonzero", "max_abs_coeff", "bound", "ok"], rows, {"series": [{"x": [r[0] for r in rows], "y": [float(r[3]) for r in rows], "label": "2^(1-n)"}], "logy": True, "xlabel": "level", "ylabel": "sup |f_n|"}, _hyp_perturb(p["a"], p["d"]))
    if p["save_run"]:
        out.extra_files["run.json"] = json.dumps(perturb.to_json(run), sort_keys=True) + "\n"
    return out


def exp_fiber_witness(p) -> Outcome:
    tree = _fat_tree(p)

    def one(seed):
        run = perturb.sample_run(tree, p["d"], None, seed)
        balls = perturb.discovered_open_set(run, p["m"])
        level = [b for b in balls if b.k == p["k"]]
        if not level:
            return [seed, 0, False, 0, 0, "no ball at that level"]
        ball = max(level, key=lambda b: (b.measure, tuple(-v for v in b.center)))
        res = perturb.witness_fiber_cantor(run, ball.chain, p["m"])
        bad = perturb.recheck_witness(run, res)
        n_leaves = len(res.tree.leaves()) if res.ok else 0
        return [seed, len(balls), res.ok and not bad, n_leaves, len(res.pruned), res.failure or ""]

    rows = parallel_map(one, _seeds(p))
    ok = all(r[2] for r in rows)
    summary = {"seeds": len(rows), "passed_seeds": sum(1 for r in rows if r[2])}
    series = [{"x": [r[0] for r in rows], "y": [r[3] for r in rows], "label": "witness leaves"}]
    return Outcome(ok, summary, ["seed", "balls", "ok", "leaves", "pruned", "failure"], rows, {"series": series, "xlabel": "seed", "ylabel": "leaves"}, _hyp_perturb(p["a"], p["d"]))


def exp_occupation(p) -> Outcome:
    tree = _fat_tree(p)
    pilot = _pilot()
    bins = p["bins"] or pilot["bins"]
    window = p["fiber_window"] or pilot["fiber_window"]

    def one(seed):
        run = perturb.sample_run(tree, 1, None, seed)
        frac = calibrate.occupation_fraction(run, bins, p["density"])
        fit = calibrate.fiber_fit(run, window)
        return [seed, frac, float(frac) >= p["mass_min"], fit.slope, fit.slope >= p["fiber_min"]]

    rows = parallel_map(one, _seeds(p))
    mass_rate = calibrate.seed_pass_rate(r[2] for r in rows)
    fiber_rate = calibrate.seed_pass_rate(r[4] for r in rows)
    ok = mass_rate >= p["seed_fraction"] and fiber_rate >= p["seed_fraction"]
    summary = {"bins": bins, "fiber_window": window, "mass_pass_rate": mass_rate, "fiber_pass_rate": fiber_rate, "mean_fiber_slope": float(np.mean([r[3] for r in rows]))}
    series = [{"x": [r[0] for r in rows], "y": [r[3] for r in rows], "label": "level-set slope"}]
    return Outcome(ok, summary, ["seed", "mass_fraction_low_density", "mass_ok", "fiber_slope", "fiber_ok"], rows, {"series": series, "xlabel": "seed", "ylabel": "slope"}, _hyp_perturb(p["a"], 1))


def _sawtooth_cfg(p) -> construct.SawtoothConfig:
    h = p["h"]
    if p["schedule"] == "desk":
        depth = p["depth"]
        return construct.SawtoothConfig(h, tuple(2 ** (n + 7) for n in range(1, depth + 1)), tuple(2 ** (n + 2) for n in range(1, depth + 1)))
    if p["schedule"] == "exact":
        return construct.sawtooth_schedule(h, p["depth"])
    if not p["a"] or not p["b"]:
        raise ConfigError("a", "an explicit schedule needs a and b")
    return construct.SawtoothConfig(h, tuple(p["a"]), tuple(p["b"]))


def exp_sawtooth_witness(p) -> Outcome:
    cfg = _sawtooth_cfg(p)
    f = functions.zero()
    if cfg.depth < p["levels"] + 1:
        raise ConfigError("levels", f"needs a schedule of depth >= {p['levels'] + 1}")

    def one(y):
        tree = construct.witness_level_tree(f, cfg, y, p["levels"])
        problems = construct.recheck_level_tree(tree, f, cfg) if tree.complete else ["incomplete"]
        counts = construct.level_set_counts(f, cfg, y, tree.m + p["levels"], seed=p["seed"])
        fit = dimension.fit_counts([float(pj) / 2 for pj, _ in counts], [n for _, n in counts])
        resid = max((nd.residual for lvl in tree.levels for nd in lvl), default=Fraction(0))
        return [y, tree.m, tree.complete, len(problems) == 0, sum(len(lvl) for lvl in tree.levels), resid, fit.slope, fit.slope >= p["slope_min"], tree.failure or ""]

    rows = parallel_map(one, p["ys"])
    ok = all(r[2] and r[3] and r[7] for r in rows)
    hyp = {"sawtooth_schedule": construct.sawtooth_checks(cfg)}
    summary = {"a": [str(v) for v in cfg.a], "b": [str(v) for v in cfg.b], "levels": p["levels"], "all_certified": all(r[2] and r[3] for r in rows), "slopes": [r[6] for r in rows]}
    series = [{"x": [float(r[0]) for r in rows], "y": [r[6] for r in rows], "label": "level-set slope"}]
    return Outcome(ok, summary, ["y", "m", "complete", "recheck_ok", "nodes", "max_residual", "slope", "slope_ok", "failure"], rows, {"series": series, "xlabel": "y", "ylabel": "slope"}, hyp)


def exp_singleton_cone(p) -> Outcome:
    h, x0, y0 = p["h"], p["x0"], p["y0"]
    cone = construct.cone_function(x0, y0, h)
    gen = rng.generator(p["seed"], "f")
    rows = []
    for i in range(p["samples"]):
        f = construct.random_lipschitz(gen, x0, y0, p["L"], p["pieces"])
        bad = construct.cone_violations(f, cone, x0, p["grid"])
        rows.append([i, len(bad), bad[0] if bad else ""])
    ok = all(r[1] == 0 for r in rows)
    dominated = h.family == "linear" and h.c > p["L"] or h.family == "hoelder" and h.c > p["L"]
    hyp = {"modulus_dominates_family": dominated}
    summary = {"samples": len(rows), "violations": sum(r[1] for r in rows), "g_at_0": cone(0)}
    xs = np.linspace(0, 1, 257)
    series = [{"x": xs.tolist(), "y": np.asarray(cone.values(xs)).tolist(), "style": "-", "label": "cone"}]
    return Outcome(ok, summary, ["sample", "violations", "first_violation"], rows, {"series": series, "xlabel": "x", "ylabel": "g(x)"}, hyp)


def exp_staircase(p) -> Outcome:
    alpha = p["alpha"] or [Fraction(1, 2 ** (k + 1)) for k in range(1, p["depth"] + 1)]
    try:
        cfg = construct.StaircaseConfig(tuple(alpha))
    except construct.ConstructError as e:
        raise ConfigError("alpha", str(e))
    g = construct.staircase_g(cfg)
    N = cfg.depth
    pts = cfg.points()
    mono = all(g(z) == v for z, v, _ in pts) and all(v0 <= v1 for (_, v0, _), (_, v1, _) in zip(pts, pts[1:]))
    mids = [(z0 + z1) / 2 for (z0, _, _), (z1, _, _) in zip(pts, pts[1:])]
    mono = mono and all(g(m) == g(z0) for m, (z0, _, _) in zip(mids, pts))
    rows, diam_ok = [], True
    for n in range(1, min(p["n_max"], N - 1) + 1):
        expect = 2 * sum(cfg.alpha[n:], Fraction(0))
        for i in range(1, 2**n + 1):
            got = construct.preimage_diameter(cfg, i, n)
            rows.append([n, i, got, expect, got == expect])
            diam_ok = diam_ok and got == expect
    z1 = Fraction(1, 2) + cfg.alpha[0]
    summary = {"g0": g(0), "g_z1": g(z1), "g1": g(1), "truncation_gap": construct.truncation_gap(cfg), "monotone": mono, "diameter_identity": diam_ok}
    ok = g(0) == 0 and g(z1) == Fraction(3, 4) and mono and diam_ok
    hyp = {"halving": True}
    if p["h"] is not None:
        try:
            levels = construct.c_gamma_sets(cfg, p["h"], N)
            summary["C_measures"] = [lv.C.measure for lv in levels]
            hyp["C_nondegenerate"] = True
        except construct.ConstructError as e:
            hyp["C_nondegenerate"] = False
            summary["C_error"] = str(e)
    xs = [float(z) for z, _, _ in pts]
    series = [{"x": xs, "y": [float(v) for _, v, _ in pts], "style": "-", "label": "g on Z"}]
    return Outcome(ok, summary, ["n", "i", "diameter", "expected", "ok"], rows, {"series": series, "xlabel": "x", "ylabel": "g"}, hyp)


def exp_gauge_schedule(p) -> Outcome:
    g, d, depth = p["gauge"], p["d"], p["depth"]
    sched = gauge.gauge_schedule(g, d, depth)
    rows_v = gauge.verify_gauge_schedule(g, d, sched)
    ok = all(r["growth"] and r["phi"] and r["integral_b"] for r in rows_v)
    phis = [[x, gauge.phi_transform(g, x)] for x in p["phi_points"]]
    rows = [[r["n"], str(sched.a[r["n"] - 1]), str(sched.b[r["n"] - 1]), r["growth"], r["phi"], r["integral_b"]] for r in rows_v]
    summary = {"gauge": str(g), "schedule": gauge.schedule_to_json(sched), "phi": phis}
    hyp = {"gauge_schedule": rows_v}
    series = [{"x": [r[0] for r in rows], "y": [math.log10(int(r[1])) for r in rows], "label": "log10 a_n"}]
    return Outcome(ok, summary, ["n", "a_n", "b_n", "growth", "phi", "integral_b"], rows, {"series": series, "xlabel": "n", "ylabel": "log10 a_n"}, hyp)


def exp_ultrametric_map(p) -> Outcome:
    tree = ultra.weighted(p["weights"], p["depth"])
    push = ultra.pushforward_check(tree)
    mono = ultra.check_one_monotone(tree)
    balls = ultra.check_balls(tree)
    rows = [["pushforward", r["node"], r["interval"][0], r["interval"][1], r["mass"], r["ok"]] for r in push]
    hold_ok = True
    exps = []
    for b in p["bs"]:
        prof = ultra.holder_profile(ultra.uniform(b, p["holder_depth"]))
        lvl = prof.min_distance.denominator.bit_length() - 1
        exact = prof.min_distance == Fraction(1, 2**lvl) and prof.min_increment == Fraction(1, b**lvl)
        hold_ok = hold_ok and exact
        exps.append({"b": b, "min_exponent": prof.min_exponent, "expected": math.log(b) / math.log(2), "exact": exact})
        rows.append(["holder", b, prof.min_increment, prof.min_distance, prof.min_exponent, exact])
    ok = all(r["ok"] for r in push) and mono and balls and hold_ok
    summary = {"pushforward_ok": all(r["ok"] for r in push), "one_monotone": mono, "balls": balls, "holder": exps}
    h = ultra.monotone_map(tree)
    series = [{"x": list(range(len(h))), "y": [float(v) for v in h], "style": "o-", "label": "h(leaf)"}]
    return Outcome(ok, summary, ["check", "key", "a", "b", "value", "ok"], rows, {"series": series, "xlabel": "leaf", "ylabel": "h"}, {"dyadic_diameters": tree.dyadic})


def exp_graph_dim(p) -> Outcome:
    tree = _fat_tree(p)
    window = p["window"] or _pilot()["graph_window"]
    lo, hi = p["slope_range"]

    def one(seed):
        run = perturb.sample_run(tree, 1, None, seed)
        fit = calibrate.graph_fit(run, window)
        return [seed, fit.slope, fit.r2, lo <= fit.slope <= hi]

    rows = parallel_map(one, _seeds(p))
    rate = calibrate.seed_pass_rate(r[3] for r in rows)
    ok = rate >= p["seed_fraction"]
    summary = {"window": window, "pass_rate": rate, "mean_slope": float(np.mean([r[1] for r in rows])), "label": "graph upper-box estimate"}
    series = [{"x": [r[0] for r in rows], "y": [r[1] for r in rows], "label": "graph slope"}]
    return Outcome(ok, summary, ["seed", "slope", "r2", "in_range"], rows, {"series": series, "xlabel": "seed", "ylabel": "slope"}, _hyp_perturb(p["a"], 1))


def random_pl(gen: np.random.Generator, breakpoints: int) -> functions.GridFunction:
    xs = [Fraction(i, breakpoints - 1) for i in range(breakpoints)]
    ys = [Fraction(int(k), 64) for k in gen.integers(-64, 65, size=breakpoints)]
    return functions.from_points(xs, ys)


def exp_indicatrix(p) -> Outcome:
    gen = rng.generator(p["seed"], "f")
    rows = []
    for i in range(p["functions"]):
        f = random_pl(gen, p["breakpoints"])
        c = dimension.banach_indicatrix_check(f)
        rows.append(["random", i, c.total_variation, c.lipschitz, c.passed, c.equality])
        mono = functions.from_points(f.xs, sorted(f.ys))
        c = dimension.banach_indicatrix_check(mono)
        # a monotone piece-linear map attains TV = Lip only when all slopes agree
        rows.append(["monotone", i, c.total_variation, c.lipschitz, c.passed, c.equality])
    for a1 in (4, 8):
        tooth = construct.sawtooth_g(construct.SawtoothConfig(construct.Linear(1), (a1,), (1,)))
        c = dimension.banach_indicatrix_check(tooth)
        rows.append(["tooth", a1, c.total_variation, c.lipschitz, c.passed, c.equality])
    lin = dimension.banach_indicatrix_check(functions.identity())
    rows.append(["identity", 0, lin.total_variation, lin.lipschitz, lin.passed, lin.equality])
    ok = all(r[4] for r in rows) and all(r[5] for r in rows if r[0] in ("tooth", "identity"))
    summary = {"functions": p["functions"], "all_pass": all(r[4] for r in rows), "equality_cases": all(r[5] for r in rows if r[0] in ("tooth", "identity"))}
    series = [{"x": [float(r[3]) for r in rows if r[0] == "random"], "y": [float(r[2]) for r in rows if r[0] == "random"], "style": "o", "label": "TV vs Lip"}]
    return Outcome(ok, summary, ["case", "index", "total_variation", "lipschitz", "pass", "equality"], rows, {"series": series, "xlabel": "Lip(f)", "ylabel": "TV(f)"})


PERTURB_PARAMS = {"a": (_list(_pos_int), REQUIRED), "epsilon": (_rational, "1/2")}

REGISTRY: dict[str, tuple[str, Callable, dict]] = {
    "triadic-dim": (
        "box-count slope of a self-similar Cantor set",
        exp_triadic_dim,
        {"set": (_choice("triadic", "prescribed"), "triadic"), "s": (_float, 0.5), "depth": (_pos_int, 12), "k_lo": (_pos_int, 3), "k_hi": (_pos_int, 9), "tolerance": (_float, 0.03), "target": (_float, None)},
    ),
    "fat-cantor-build": ("exact piece measures of a fat Cantor set", exp_fat_cantor_build, {"a": (_list(_pos_int), REQUIRED), "epsilon": (_rational, "1/4"), "depth": (_pos_int, None)}),
    "mass-bound": (
        "mass-distribution bound over aligned windows",
        exp_mass_bound,
        {"a": (_list(_pos_int), REQUIRED), "b": (_list(_pos_int), REQUIRED), "epsilon": (_rational, "1/4"), "kind": (_choice("fat", "tiling"), "fat"), "selector": (_choice("first", "random"), "first"), "seed": (_int, 0), "k": (_pos_int, None), "cap": (_cap, None), "c": (_rational, 4)},
    ),
    "perturbation-run": ("one sampled perturbation run and its invariants", exp_perturbation_run, {**PERTURB_PARAMS, "d": (_pos_int, 1), "seed": (_int, REQUIRED), "bins": (_pos_int, None), "save_run": (_bool, False)}),
    "fiber-witness": ("witness Cantor sets inside fibers", exp_fiber_witness, {**PERTURB_PARAMS, "d": (_pos_int, 1), "seed": (_int, 0), "seeds": (_list(_int), None), "m": (_pos_int, 1), "k": (_int, 1)}),
    "occupation": (
        "occupation histogram and level-set slopes across seeds",
        exp_occupation,
        {**PERTURB_PARAMS, "seed": (_int, 0), "seeds": (_list(_int), None), "bins": (_pos_int, None), "density": (_float, 4.0), "mass_min": (_float, 0.9), "fiber_min": (_float, 0.75), "seed_fraction": (_float, 0.8), "fiber_window": (_window, None)},
    ),
    "sawtooth-witness": (
        "level-set witness trees of f + G",
        exp_sawtooth_witness,
        {"h": (_modulus, {"family": "linear", "c": 1}), "schedule": (_choice("desk", "exact", "explicit"), "desk"), "depth": (_pos_int, 4), "a": (_list(_pos_int), None), "b": (_list(_pos_int), None), "levels": (_int, 3), "ys": (_list(_rational), ["-1/8", "0", "1/8"]), "slope_min": (_float, 0.8), "seed": (_int, 0)},
    ),
    "singleton-cone": (
        "cone domination over a Lipschitz family",
        exp_singleton_cone,
        {"h": (_modulus, {"family": "linear", "c": 2}), "x0": (_rational, "1/2"), "y0": (_rational, 0), "samples": (_pos_int, 100), "seed": (_int, 0), "grid": (_pos_int, construct.CONE_GRID), "L": (_rational, 1), "pieces": (_pos_int, 64)},
    ),
    "staircase": ("exact checks of the singleton-zero staircase", exp_staircase, {"alpha": (_list(_rational), None), "depth": (_pos_int, 6), "n_max": (_pos_int, 4), "h": (_modulus, None)}),
    "gauge-schedule": ("gauge schedule with exact re-verification", exp_gauge_schedule, {"gauge": (_gauge, {"family": "power", "s": "1/2"}), "d": (_pos_int, 1), "depth": (_pos_int, 3), "phi_points": (_list(_float), [1, 4, 10])}),
    "ultrametric-map": ("order-preserving map of a weighted ultrametric tree", exp_ultrametric_map, {"weights": (_list(_rational), ["1/3", "2/3"]), "depth": (_pos_int, 3), "bs": (_list(_pos_int), [2, 3, 4]), "holder_depth": (_pos_int, 4)}),
    "graph-dim": (
        "graph box-count slope of sampled perturbations",
        exp_graph_dim,
        {**PERTURB_PARAMS, "seed": (_int, 0), "seeds": (_list(_int), None), "window": (_window, None), "slope_range": (_list(_float), [1.6, 2.0]), "seed_fraction": (_float, 0.8)},
    ),
    "indicatrix": ("total variation against the Lipschitz bound", exp_indicatrix, {"functions": (_pos_int, 50), "breakpoints": (_pos_int, 64), "seed": (_int, 0)}),
}


# ---------------------------------------------------------------- driver


def load_config(path: str) -> tuple[str, dict, dict]:
    """Parse and validate a config file; returns (name, params, raw params)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON: {e}")
    if not isinstance(doc, dict):
        raise ConfigError("config", "expected a JSON object")
    name = doc.get("experiment")
    if name is None:
        raise ConfigError("experiment", "missing")
    if name not in REGISTRY:
        raise ConfigError("experiment", f"unknown experiment {name!r}; see --list")
    raw = doc.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("params", "expected an object")
    unknown = set(doc) - {"experiment", "params", "out"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    schema = REGISTRY[name][2]
    for key in raw:
        if key not in schema:
            raise ConfigError(key, f"unknown parameter for {name}")
    params = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            params[key] = kind(key, raw[key])
        elif default is REQUIRED:
            raise ConfigError(key, "missing required parameter")
        else:
            params[key] = None if default is None else kind(key, default)
    return name, params, doc


def run_experiment(name: str, params: dict) -> tuple[Outcome, dict, str, str]:
    out = REGISTRY[name][1](params)
    data_csv = _csv(out.header, out.rows)
    body = {
        "experiment": name,
        "params": _jsonable(params),
        "passed": bool(out.passed),
        "summary": _jsonable(out.summary),
        "hypotheses": _jsonable(out.hypotheses),
    }
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    body["digest"] = hashlib.sha256((canon + "\n" + data_csv).encode()).hexdigest()
    body["version"] = __version__
    return out, body, data_csv, _svg(out.plot)


def _cmd_run(path: str, out_dir: str | None) -> int:
    try:
        name, params, doc = load_config(path)
        out_dir = out_dir or doc.get("out") or "."
        outcome, body, data_csv, svg = run_experiment(name, params)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    _atomic_write(os.path.join(out_dir, "result.json"), json.dumps(body, indent=1, sort_keys=True) + "\n")
    _atomic_write(os.path.join(out_dir, "data.csv"), data_csv)
    _atomic_write(os.path.join(out_dir, "plot.svg"), svg)
    for fname, text in outcome.extra_files.items():
        _atomic_write(os.path.join(out_dir, fname), text)
    print(f"{name}: {'pass' if outcome.passed else 'FAIL'}  digest {body['digest'][:16]}")
    return 0 if outcome.passed else 1


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="fiberdim", description="Run configured fractal-dimension experiments.")
    ap.add_argument("--list", action="store_true", help="list registered experiments")
    ap.add_argument("--validate", metavar="CONFIG", help="check a config file without running it")
    sub = ap.add_subparsers(dest="cmd")
    rp = sub.add_parser("run", help="run one experiment")
    rp.add_argument("config")
    rp.add_argument("--out", default=None, help="output directory (default: config 'out' or '.')")
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    if args.list:
        for name, (desc, _, _) in REGISTRY.items():
            print(f"{name:18s} {desc}")
        return 0
    if args.validate:
        try:
            name, _, _ = load_config(args.validate)
        except ConfigError as e:
            print(f"config error: {e}", file=sys.stderr)
            return 2
        print(f"{args.validate}: valid {name} config")
        return 0
    if args.cmd == "run":
        return _cmd_run(args.config, args.out)
    ap.print_usage(sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
