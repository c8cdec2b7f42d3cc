from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiberdim import cantor, functions, perturb

seeds = st.integers(0, 2**40)


def small_run(seed, a=(4, 4, 4, 4), d=1):
    tree = cantor.build_fat_cantor(a, Fraction(1, 2), len(a))
    return perturb.sample_run(tree, d, None, seed)


@given(seeds, st.integers(1, 2))
def test_coefficients_and_tail_bound(seed, d):
    run = small_run(seed, d=d)
    N = run.depth
    assert run.h_int.shape == (run.tree.count(N), d)
    for c in run.coeffs:
        assert set(np.unique(c)) <= {-1, 0, 1}
    for L in range(1, N + 1):
        tail = run.h_int - run.partial_int(L) * 2 ** (N - L)
        assert np.abs(tail).max() <= 2 ** (N - L)


@given(seeds)
def test_same_seed_same_run(seed):
    assert small_run(seed).digest() == small_run(seed).digest()


def test_different_seeds_differ():
    assert small_run(1).digest() != small_run(2).digest()


@given(seeds)
def test_json_round_trip(seed):
    run = small_run(seed)
    back = perturb.from_json(perturb.to_json(run))
    assert back.digest() == run.digest()
    assert np.array_equal(back.h_int, run.h_int)


@given(seeds, st.sampled_from([8, 16, 32]))
def test_occupation_conserves_mass(seed, bins):
    run = small_run(seed)
    H = perturb.occupation_histogram(run, bins)
    assert sum(H.masses.values(), Fraction(0)) + H.outside_mass == run.tree.total_measure
    assert 0 <= H.fraction_below(4) <= 1


@given(seeds)
def test_level_set_is_exact_for_zero_drift(seed):
    run = small_run(seed)
    y = perturb.modal_value(run)
    pieces = perturb.level_set(run, y)
    vals = run.h_int[pieces, 0].astype(object) * run.unit
    assert len(pieces) > 0
    assert all(abs(v - y[0]) <= run.unit for v in vals)
    outside = np.setdiff1d(np.arange(run.tree.count(run.depth)), pieces)
    assert all(abs(Fraction(int(run.h_int[i, 0])) * run.unit - y[0]) > run.unit for i in outside)


@given(st.lists(st.fractions(-1, 1), min_size=1, max_size=2), st.integers(0, 4))
def test_refine_cover_covers_the_ball(z, n):
    balls = perturb.refine_cover(z, n)
    assert len(balls) == 2 ** len(z)
    r = Fraction(1, 2**n)
    # the corners of B(z, 2^-n) lie in the union of the child balls
    for signs in np.ndindex(*(2,) * len(z)):
        corner = [c + (r if s else -r) for c, s in zip(z, signs)]
        assert any(all(abs(p - cc) <= rr for p, cc in zip(corner, c)) for c, rr in balls)


@settings(max_examples=10)
@given(seeds)
def test_discovered_balls_have_parents(seed):
    run = small_run(seed, a=(6,) * 5)
    balls = perturb.discovered_open_set(run, 1)
    keys = {(b.k, b.center) for b in balls}
    for b in balls:
        assert len(b.chain) == b.k + 1
        assert b.radius == Fraction(1, 2 ** (1 + b.k))
        if b.k:
            parent = tuple(sum(v) for v in zip(*b.chain[:-1]))
            assert (b.k - 1, parent) in keys


@settings(max_examples=10)
@given(seeds)
def test_witness_leaves_stay_in_ball(seed):
    run = small_run(seed, a=(6,) * 6)
    balls = [b for b in perturb.discovered_open_set(run, 1) if b.k == 1]
    res = perturb.witness_fiber_cantor(run, max(balls, key=lambda b: b.measure).chain, 1)
    if res.ok:
        assert perturb.recheck_witness(run, res) == []
        for leaf in res.tree.leaves():
            h = Fraction(int(run.h_int[leaf, 0])) * run.unit
            assert abs(h - res.center[0]) <= res.bound
    else:
        assert res.failure


def test_graph_segments_cover_every_piece():
    run = small_run(5)
    seg = perturb.graph_segments(run)
    assert len(seg.segments) == run.tree.count(run.depth)


def test_nonzero_drift_requires_lipschitz_or_tol():
    tree = cantor.build_fat_cantor((4, 4), Fraction(1, 2), 2)
    run = perturb.sample_run(tree, 1, functions.identity(), 3)
    assert not run.g_is_zero
    assert len(perturb.level_set(run, [Fraction(1, 2)], tol=1)) > 0


def test_chebyshev_is_seeded_and_bounded():
    r1 = perturb.chebyshev_bound_mc(100, 2, Fraction(1, 4), 2000, seed=1)
    r2 = perturb.chebyshev_bound_mc(100, 2, Fraction(1, 4), 2000, seed=1)
    assert r1 == r2 and r1["empirical"] <= r1["bound"]
    with pytest.raises(perturb.PerturbError):
        perturb.chebyshev_bound_mc(100, 5, Fraction(1, 4), 10, seed=1)


def test_schedule_growth_from_level_four():
    assert perturb.paper_schedule(1, 4)["growth_holds"]
