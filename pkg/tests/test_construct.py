from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from fiberdim import construct, functions, rng

unit = st.fractions(min_value=0, max_value=1)


@given(st.lists(st.sampled_from([2, 4, 6, 8]), min_size=1, max_size=3), unit)
def test_partial_sum_matches_tooth_by_tooth(a, x):
    cfg = construct.SawtoothConfig(construct.Linear(1), tuple(a), (1,) * len(a))
    for m in range(1, len(a) + 1):
        assert construct.partial_sum(cfg, m, x) == oracles.sawtooth_direct(a, m, x)


@given(st.integers(1, 3), st.data())
def test_grid_partial_sum_matches_direct(k, data):
    a = (4, 8, 4)
    cfg = construct.SawtoothConfig(construct.Linear(1), a, (1, 1, 1))
    P = int(np.prod(a[:k]))
    j = data.draw(st.integers(0, P))
    assert construct.grid_partial_sum(cfg, k, j) == oracles.sawtooth_direct(a, k, Fraction(j, P))


def test_first_tooth():
    cfg = construct.SawtoothConfig(construct.Linear(1), (4,), (1,))
    g = construct.sawtooth_g(cfg)
    assert g(0) == Fraction(1, 2) and g(Fraction(1, 4)) == Fraction(-1, 2)
    assert g.lipschitz() == 4 == construct.lipschitz_bound(cfg, 1)


def test_exact_schedule_for_linear_modulus():
    cfg = construct.sawtooth_schedule(construct.Linear(1), 1)
    assert cfg.a == (32,) and cfg.b == (1,)
    assert all(all(r[k] for k in ("modulus", "growth", "b_rule")) for r in construct.sawtooth_checks(cfg))


def test_exact_flag_rejects_desk_schedule():
    with pytest.raises(construct.ConstructError):
        construct.SawtoothConfig(construct.Linear(1), (256, 512), (8, 16), paper_exact=True)


def test_witness_rejects_out_of_range_level():
    cfg = construct.SawtoothConfig(construct.Linear(1), (256, 512, 1024), (8, 16, 32))
    with pytest.raises(construct.ConstructError, match="strictly between"):
        construct.witness_level_tree(functions.zero(), cfg, 1, 1)


def test_witness_tree_small():
    cfg = construct.SawtoothConfig(construct.Linear(1), (256, 512, 1024), (8, 16, 32))
    tree = construct.witness_level_tree(functions.zero(), cfg, Fraction(1, 16), 1)
    assert tree.complete
    assert construct.recheck_level_tree(tree, functions.zero(), cfg) == []
    back = construct.from_json(construct.to_json(tree))
    assert back == tree
    assert construct.recheck_level_tree(back, functions.zero(), cfg) == []


exponents = st.builds(Fraction, st.integers(1, 8), st.integers(1, 8)).filter(lambda a: a <= 1)


@given(st.fractions(min_value=Fraction(1, 100), max_value=10, max_denominator=10**6), exponents, st.fractions(min_value=0, max_value=2, max_denominator=10**9))
def test_modulus_inverse_brackets(c, alpha, v):
    h = construct.Hoelder(c, alpha)
    t = h.inverse(v)
    if v == 0:
        assert t == 0
        return
    assert not h.exceeds_at(t * (1 - Fraction(1, 2**40)), v)
    assert h.exceeds_at(t * (1 + Fraction(1, 2**40)), v)


@given(st.fractions(min_value=Fraction(1, 100), max_value=10), st.fractions(min_value=0, max_value=1))
def test_linear_inverse_is_exact(c, v):
    h = construct.Linear(c)
    assert h.value(h.inverse(v)) == v


@given(st.integers(0, 2**32), st.fractions(min_value=Fraction(1, 8), max_value=Fraction(7, 8)))
def test_cone_dominates_slower_lipschitz_maps(seed, x0):
    h = construct.Linear(2)
    cone = construct.cone_function(x0, 0, h)
    f = construct.random_lipschitz(rng.generator(seed, "f"), x0, 0, 1, 16)
    assert f(x0) == 0 and f.lipschitz() <= 1
    assert construct.cone_violations(f, cone, x0, 256) == []


def test_cone_catches_a_steep_map():
    x0 = Fraction(1, 2)
    cone = construct.cone_function(x0, 0, construct.Linear(2))
    steep = functions.from_points([0, x0, 1], [-3, 0, 3])
    assert construct.cone_violations(steep, cone, x0, 64)


@given(st.integers(1, 6))
def test_staircase_matches_brute_force(depth):
    alpha = tuple(Fraction(1, 2 ** (k + 1)) for k in range(1, depth + 1))
    cfg = construct.StaircaseConfig(alpha)
    g = construct.staircase_g(cfg)
    for j in range(0, 129):
        x = Fraction(j, 128)
        assert g(x) == oracles.staircase_value(alpha, x)


def test_staircase_rejects_slow_decay():
    with pytest.raises(construct.ConstructError, match="halving"):
        construct.StaircaseConfig((Fraction(1, 4), Fraction(1, 5)))


@given(st.integers(1, 5), st.data())
def test_rank_signs_is_lexicographic(n, data):
    i = data.draw(st.integers(1, 2**n - 1))
    assert construct.rank_signs(i, n) < construct.rank_signs(i + 1, n)


def test_first_level_of_c_sets():
    cfg = construct.StaircaseConfig(tuple(Fraction(1, 2 ** (k + 1)) for k in range(1, 5)))
    levels = construct.c_gamma_sets(cfg, construct.Linear(Fraction(1, 8)), 2)
    assert levels[1].C.parts == ((Fraction(1, 8), Fraction(3, 8)), (Fraction(5, 8), Fraction(7, 8)))


def test_choose_alpha_is_seeded():
    def sampler(gen):
        y0 = Fraction(int(gen.integers(0, 1024)), 1024)
        return construct.random_lipschitz(gen, Fraction(1, 2), y0, Fraction(1, 64), 8)

    h = construct.Linear(Fraction(1, 32))
    a1 = construct.choose_alpha_mc(sampler, h, 2, 64, seed=3)
    a2 = construct.choose_alpha_mc(sampler, h, 2, 64, seed=3)
    assert a1.alpha == a2.alpha
    assert all(b <= a / 2 for a, b in zip(a1.alpha, a1.alpha[1:]))
