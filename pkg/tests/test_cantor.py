from fractions import Fraction
import math

import pytest
from hypothesis import given, strategies as st

import oracles
from fiberdim import cantor
from fiberdim.exact import IntervalUnion, q, qstr

schedules = st.lists(st.integers(1, 4), min_size=1, max_size=4)
epsilons = st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100))


@given(schedules, epsilons)
def test_fat_cantor_matches_removal_oracle(a, eps):
    tree = cantor.build_fat_cantor(a, eps, len(a))
    ref = oracles.fat_cantor_hulls(a, eps)
    for n in range(1, len(a) + 1):
        lo, hi = tree.bounds(n)
        assert list(zip(lo, hi)) == ref[n]
        assert tree.piece_measure(n) * tree.count(n) == 1 - eps


@given(schedules, epsilons)
def test_pieces_nest_and_stay_disjoint(a, eps):
    tree = cantor.build_fat_cantor(a, eps, len(a))
    for n in range(1, len(a) + 1):
        lo, hi = tree.bounds(n)
        plo, phi = tree.bounds(n - 1)
        assert all(h < l for h, l in zip(hi, lo[1:]))
        for f, (l, h) in enumerate(zip(lo, hi)):
            p = f // a[n - 1]
            assert plo[p] <= l and h <= phi[p]


@given(schedules, epsilons)
def test_lazy_and_materialised_hulls_agree(a, eps):
    tree = cantor.build_fat_cantor(a, eps, len(a))
    n = len(a)
    lo, hi = tree.bounds(n)
    for f, (index, l, h) in enumerate(tree.iter_level(n)):
        assert tree.flatten(index) == f and (l, h) == (lo[f], hi[f])


def test_rejects_bad_parameters():
    with pytest.raises(cantor.CantorError):
        cantor.build_fat_cantor((2,), 1, 1)
    with pytest.raises(cantor.CantorError):
        cantor.build_fat_cantor((2,), Fraction(1, 2), 3)
    with pytest.raises(cantor.CantorError):
        cantor.Schedule((2, 3), (3, 1))


@given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=3), st.sampled_from(["first", "random"]), st.integers(0, 2**32))
def test_natural_measure_is_a_probability(ab, selector, seed):
    a = [max(x, y) for x, y in ab]
    b = [min(x, y) for x, y in ab]
    tree = cantor.build_fat_cantor(a, Fraction(1, 4), len(a))
    sub = cantor.select_subset(tree, b, selector, seed=seed)
    assert len(sub.leaves()) == math.prod(b)
    mass = cantor.natural_measure(sub)
    for n in range(len(a) + 1):
        assert sum(mass.weight(n)) == 1


def test_random_selection_is_seeded():
    tree = cantor.build_fat_cantor((6, 6), Fraction(1, 4), 2)
    s1 = cantor.select_subset(tree, (3, 2), "random", seed=7)
    s2 = cantor.select_subset(tree, (3, 2), "random", seed=7)
    assert s1.levels == s2.levels


def test_ratio_condition():
    rows = cantor.check_ratio_condition((16, 512), (8, 256), 2)
    assert rows == [{"n": 1, "a_n": 16, "ratio": Fraction(4), "holds": True}]
    assert not cantor.check_ratio_condition((4, 4), (1, 1), 2)[0]["holds"]


def test_mass_bound_against_brute_force():
    tree = cantor.build_fat_cantor((8, 16), Fraction(1, 4), 2)
    sub = cantor.select_subset(tree, (4, 4), "first")
    rep = cantor.verify_mass_bound(cantor.natural_measure(sub), 2, cap=None)
    assert rep.sup_ratio == pytest.approx(oracles.window_sup(sub.hulls(2), float(rep.scale), 0.5), rel=1e-12)


def test_power_le_is_exact():
    # 1/4 <= 1 * (1/16)^(1/2) holds with equality
    assert cantor.power_le(Fraction(1, 4), Fraction(1, 16), Fraction(1), Fraction(1, 2))
    assert not cantor.power_le(Fraction(1, 4) + Fraction(1, 10**30), Fraction(1, 16), Fraction(1), Fraction(1, 2))


def test_triadic_subset_hulls():
    sub = cantor.triadic_subset(3)
    assert sub.hulls(1) == [(Fraction(0), Fraction(1, 3)), (Fraction(2, 3), Fraction(1))]
    assert len(sub.leaves()) == 8


def test_json_round_trip():
    tree = cantor.build_fat_cantor((2, 3), Fraction(1, 4), 2)
    sub = cantor.select_subset(tree, (1, 2), "first")
    back = cantor.from_json(cantor.to_json(sub))
    assert back.levels == sub.levels and back.parent.lengths == tree.lengths


@given(st.fractions())
def test_rational_strings_round_trip(x):
    assert q(qstr(x)) == x


@given(st.lists(st.tuples(st.fractions(0, 1), st.fractions(0, 1)), max_size=6))
def test_interval_union_measure_is_subadditive(pairs):
    ivs = [(min(x, y), max(x, y)) for x, y in pairs]
    u = IntervalUnion.of(ivs)
    assert u.measure <= sum((h - l for l, h in ivs), Fraction(0))
    for l, h in ivs:
        assert u.contains(l) and u.contains(h)
