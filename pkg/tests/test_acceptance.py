"""One test per acceptance criterion; a summary line per criterion is printed at the end of the run."""

import json
import math
import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from fiberdim import calibrate, cantor, cli, construct, dimension, functions, gauge, perturb, rng, ultra

SEEDS = list(range(100, 120))
A7 = (6,) * 7
EPS = Fraction(1, 2)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.fixture(scope="module")
def runs():
    with Timer() as t:
        tree = cantor.build_fat_cantor(A7, EPS, 7)
        out = [perturb.sample_run(tree, 1, None, s) for s in SEEDS]
    return out, t.elapsed


@pytest.fixture(scope="module")
def pilot():
    return calibrate.load()


@pytest.mark.criterion(1, "fat-Cantor piece measures")
def test_c01_fat_cantor_identities():
    a, eps = (2, 3, 2, 3), Fraction(1, 4)
    with Timer() as t:
        tree = cantor.build_fat_cantor(a, eps, 4)
        ref = oracles.fat_cantor_hulls(a, eps)
        for n in range(1, 5):
            lo, hi = tree.bounds(n)
            assert list(zip(lo, hi)) == ref[n]
            expect = Fraction(3, 4) / math.prod(a[:n])
            for l, h in ref[n]:
                assert oracles.limit_piece_measure(a, eps, n, h - l) == expect
            assert tree.piece_measure(n) == expect
            assert tree.piece_measure(n) * tree.count(n) == Fraction(3, 4)
    assert t.elapsed < 1


@pytest.mark.criterion(2, "mass-distribution bound")
def test_c02_mass_bound():
    with Timer() as t:
        tree = cantor.build_fat_cantor((16, 512), Fraction(1, 4), 2)
        sub = cantor.select_subset(tree, (8, 256), "first")
        rep = cantor.verify_mass_bound(cantor.natural_measure(sub), 2, cap=None)
    assert len(sub.leaves()) == 2048
    assert rep.windows_tested == 2048 * 2049 // 2
    assert rep.passed and rep.sup_ratio <= 4
    brute = oracles.window_sup(sub.hulls(2), float(rep.scale), 0.5)
    assert rep.sup_ratio == pytest.approx(brute, rel=1e-12)
    assert t.elapsed < 10
    # the diameter-capped family and the compact-type tree pass as well
    assert cantor.verify_mass_bound(cantor.natural_measure(sub), 2).passed
    tiling = cantor.select_subset(cantor.tiling_tree((16, 512), 2), (8, 256), "first")
    assert cantor.verify_mass_bound(cantor.natural_measure(tiling), 2, cap=None).passed


@pytest.mark.criterion(3, "calibrated box-count estimator")
def test_c03_calibrated_estimator():
    ks = range(3, 10)
    with Timer() as t:
        ps = dimension.from_tree(cantor.triadic_subset(12))
        fit = dimension.fit_dimension(ps, [Fraction(1, 2 * 3**k) for k in ks])
    assert t.elapsed < 5
    assert fit.counts == oracles.triadic_counts(12, ks)
    assert abs(fit.slope - math.log(2) / math.log(3)) <= 0.03

    with Timer() as t:
        tree = cantor.prescribed_dimension_cantor(0.5, 12)
        fit = dimension.fit_dimension(dimension.from_tree(tree), [tree.lengths[k] / 2 for k in ks])
    assert t.elapsed < 5
    assert abs(fit.slope - 0.5) <= 0.05


@pytest.mark.criterion(4, "perturbation invariants")
def test_c04_perturbation_invariants(runs, pilot):
    rs, build = runs
    with Timer() as t:
        for run in rs:
            N = run.depth
            for n, c in enumerate(run.coeffs, 1):
                # |f_n| = |c_n| 2^-n * 2 on each level-n piece
                assert np.abs(c.astype(np.int64)).max() <= 1
                assert Fraction(2 * int(np.abs(c).max()), 2**n) <= Fraction(2, 2**n)
            for Np in range(1, N + 1):
                tail = run.h_int - run.partial_int(Np) * 2 ** (N - Np)
                assert int(np.abs(tail).max()) <= 2 ** (N - Np)
            H = perturb.occupation_histogram(run, pilot["bins"])
            assert sum(H.masses.values(), Fraction(0)) + H.outside_mass == run.tree.total_measure
            assert H.outside_mass == 0
    assert build + t.elapsed < 30


@pytest.mark.criterion(5, "occupation regularity and fiber size")
def test_c05_occupation_and_fibers(runs, pilot, request):
    rs, _ = runs
    tg = pilot["targets"]
    mass_ok = [float(calibrate.occupation_fraction(r, pilot["bins"], tg["density"])) >= tg["mass_min"] for r in rs]
    slopes = [calibrate.fiber_fit(r, pilot["fiber_window"]).slope for r in rs]
    fiber_rate = calibrate.seed_pass_rate(s >= tg["fiber_min"] for s in slopes)
    mass_rate = calibrate.seed_pass_rate(mass_ok)
    request.node.criterion_note = f"mass {mass_rate:.2f}, fiber {fiber_rate:.2f}, mean slope {np.mean(slopes):.3f}"
    assert mass_rate >= tg["seed_fraction"]
    assert fiber_rate >= tg["seed_fraction"]


@pytest.mark.criterion(6, "fiber witness tree")
def test_c06_fiber_witness():
    tree = cantor.build_fat_cantor(A7, EPS, 7)
    with Timer() as t:
        for seed in SEEDS[:10]:
            run = perturb.sample_run(tree, 1, None, seed)
            balls = [b for b in perturb.discovered_open_set(run, 1) if b.k == 1]
            assert balls
            ball = max(balls, key=lambda b: b.measure)
            res = perturb.witness_fiber_cantor(run, ball.chain, 1)
            assert res.ok, res.failure
            assert res.bound == Fraction(2, 2**7) + res.radius
            assert perturb.recheck_witness(run, res) == []
            assert res.tree.depth == 7
            # independent exact recheck of every leaf
            unit = 2 ** (7 - 1)
            c = res.center[0] * 2**7 / 2
            for leaf in res.tree.leaves():
                assert abs(Fraction(int(run.h_int[leaf, 0])) - c) <= 1 + res.radius * unit
    assert t.elapsed < 30


@pytest.mark.criterion(7, "sawtooth witness")
def test_c07_sawtooth_witness():
    cfg = construct.SawtoothConfig(construct.Linear(1), tuple(2 ** (n + 7) for n in range(1, 5)), tuple(2 ** (n + 2) for n in range(1, 5)))
    f = functions.zero()
    with Timer() as t:
        for y in (Fraction(-1, 8), Fraction(0), Fraction(1, 8)):
            tree = construct.witness_level_tree(f, cfg, y, 3)
            assert tree.complete, tree.failure
            assert construct.recheck_level_tree(tree, f, cfg) == []
            for lvl in tree.levels:
                for nd in lvl:
                    k = tree.m + nd.level
                    u, v = nd.bracket
                    assert oracles.sawtooth_direct(cfg.a, k, u) <= y <= oracles.sawtooth_direct(cfg.a, k, v)
                    assert abs(oracles.sawtooth_direct(cfg.a, k, nd.x) - y) == nd.residual
            counts = construct.level_set_counts(f, cfg, y, tree.m + 3)
            fit = dimension.fit_counts([float(p) / 2 for p, _ in counts], [n for _, n in counts])
            assert fit.slope >= 0.8
    assert t.elapsed < 60


@pytest.mark.criterion(8, "singleton zero cone")
def test_c08_singleton_cone():
    h = construct.Linear(2)
    x0, y0 = Fraction(1, 2), Fraction(0)
    with Timer() as t:
        cone = construct.cone_function(x0, y0, h)
        gen = rng.generator(0, "f")
        for _ in range(100):
            f = construct.random_lipschitz(gen, x0, y0, 1, 64)
            assert f(x0) == y0 and f.lipschitz() <= 1
            assert construct.cone_violations(f, cone, x0, 4096) == []
    assert t.elapsed < 5


@pytest.mark.criterion(9, "staircase exactness")
def test_c09_staircase():
    alpha = tuple(Fraction(1, 2 ** (k + 1)) for k in range(1, 7))
    with Timer() as t:
        cfg = construct.StaircaseConfig(alpha)
        g = construct.staircase_g(cfg)
        assert g(0) == 0
        assert g(Fraction(1, 2) + alpha[0]) == Fraction(3, 4)
        for n in range(1, 5):
            for i in range(1, 2**n + 1):
                assert construct.preimage_diameter(cfg, i, n) == 2 * sum(alpha[n:])
        pts = cfg.points()
        vals = [g(z) for z, _, _ in pts]
        assert vals == sorted(vals)
        assert all(g(z) == v for z, v, _ in pts)
        probes = [Fraction(j, 512) for j in range(513)]
        assert [g(x) for x in probes] == [oracles.staircase_value(alpha, x) for x in probes]
    assert t.elapsed < 5


@pytest.mark.criterion(10, "Banach indicatrix")
def test_c10_indicatrix():
    gen = rng.generator(0, "f")
    with Timer() as t:
        for _ in range(50):
            f = cli.random_pl(gen, 64)
            c = dimension.banach_indicatrix_check(f)
            assert c.total_variation == oracles.total_variation(f.ys)
            assert c.lipschitz == oracles.max_slope(f.xs, f.ys)
            assert c.passed
            mono = functions.from_points(f.xs, [Fraction(3 * i, 7) for i in range(64)])
            assert dimension.banach_indicatrix_check(mono).equality
        tooth = construct.sawtooth_g(construct.SawtoothConfig(construct.Linear(1), (4,), (1,)))
        assert dimension.banach_indicatrix_check(tooth).equality
    assert t.elapsed < 1


@pytest.mark.criterion(11, "gauge transforms")
def test_c11_gauge():
    with Timer() as t:
        g = gauge.Power(Fraction(1, 2))
        for x in (1, 4, 10):
            assert gauge.phi_transform(g, x) == pytest.approx(x * x + 1, abs=1e-9)
        r = np.linspace(1e-3, 1, 1000)
        got = gauge.divide_by_power(gauge.Power(Fraction(3, 2)), 1)(r)
        assert np.max(np.abs(got - gauge.Power(Fraction(1, 2))(r))) <= 1e-12
        sched = gauge.gauge_schedule(g, 1, 3)
        rows = gauge.verify_gauge_schedule(g, 1, sched)
        assert all(r["growth"] and r["phi"] and r["integral_b"] for r in rows)
    assert t.elapsed < 5


@pytest.mark.criterion(12, "ultrametric map")
def test_c12_ultrametric():
    w = [Fraction(1, 3), Fraction(2, 3)]
    with Timer() as t:
        tree = ultra.weighted(w, 3)
        ref = oracles.ultra_intervals(w, 3)
        rows = ultra.pushforward_check(tree)
        assert rows and all(r["ok"] for r in rows)
        for r in rows:
            assert r["interval"] == ref[tuple(r["node"])]
        for b in (2, 3, 4):
            prof = ultra.holder_profile(ultra.uniform(b, 4))
            n = prof.min_distance.denominator.bit_length() - 1
            assert prof.min_distance == Fraction(1, 2**n) and prof.min_increment == Fraction(1, b**n)
            assert prof.min_exponent == pytest.approx(math.log(b) / math.log(2), abs=1e-12)
    assert t.elapsed < 1


@pytest.mark.criterion(13, "Chebyshev bound")
def test_c13_chebyshev():
    with Timer() as t:
        res = perturb.chebyshev_bound_mc(100, 2, Fraction(1, 4), 10_000, seed=0)
    bound = res["bound"]
    assert bound == pytest.approx(0.32)
    assert res["empirical"] <= bound + 3 * math.sqrt(bound * (1 - bound) / 10_000)
    assert t.elapsed < 5


@pytest.mark.criterion(14, "graph dimension")
def test_c14_graph_dimension(runs, pilot, request):
    rs, _ = runs
    lo, hi = pilot["targets"]["graph_range"]
    with Timer() as t:
        slopes = [calibrate.graph_fit(r, pilot["graph_window"]).slope for r in rs]
    rate = calibrate.seed_pass_rate(lo <= s <= hi for s in slopes)
    request.node.criterion_note = f"in-range {rate:.2f}, mean slope {np.mean(slopes):.3f}"
    assert t.elapsed < 30
    assert rate >= pilot["targets"]["seed_fraction"]


SEEDED = ["mass-bound", "perturbation-run", "fiber-witness", "occupation", "sawtooth-witness", "singleton-cone", "graph-dim", "indicatrix"]


@pytest.mark.criterion(15, "determinism")
def test_c15_determinism(monkeypatch, tmp_path):
    from pathlib import Path

    configs = Path(__file__).resolve().parent.parent / "configs"
    for name in SEEDED:
        exp, params, _ = cli.load_config(str(configs / f"{name}.json"))
        monkeypatch.delenv("NO_PARALLEL", raising=False)
        d1 = cli.run_experiment(exp, params)[1]["digest"]
        d2 = cli.run_experiment(exp, params)[1]["digest"]
        monkeypatch.setenv("NO_PARALLEL", "1")
        d3 = cli.run_experiment(exp, params)[1]["digest"]
        assert d1 == d2 == d3, name
    # byte-level check through the installed entry point
    cfg = str(configs / "perturbation-run.json")
    outs = []
    for i, env in enumerate([{}, {}, {"NO_PARALLEL": "1"}]):
        out = tmp_path / str(i)
        subprocess.run([sys.executable, "-m", "fiberdim.cli", "run", cfg, "--out", str(out)], check=True, env={**os.environ, **env}, capture_output=True)
        outs.append(((out / "result.json").read_bytes(), (out / "data.csv").read_bytes(), (out / "plot.svg").read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    assert json.loads(outs[0][0])["digest"]
