from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from fiberdim import gauge, rng, ultra


@given(st.floats(1, 50))
def test_phi_of_square_root_gauge(x):
    # r phi(1/r) = sqrt(r) <= x exactly when r <= x^2
    assert gauge.phi_transform(gauge.Power(Fraction(1, 2)), x) == pytest.approx(x * x + 1, rel=1e-9)


@given(st.sampled_from([Fraction(3, 2), Fraction(5, 4), Fraction(7, 4)]))
def test_divide_by_power_of_power_gauge(s):
    r = np.linspace(1e-3, 1, 200)
    got = gauge.divide_by_power(gauge.Power(s), 1)(r)
    assert np.allclose(got, r ** float(s - 1), atol=1e-12)


def test_gauge_schedule_reverifies():
    g = gauge.Power(Fraction(1, 2))
    sched = gauge.gauge_schedule(g, 1, 3)
    assert all(all(r[k] for k in ("growth", "phi", "integral_b")) for r in gauge.verify_gauge_schedule(g, 1, sched))
    bumped = type(sched)(tuple(v - 1 if i == 2 else v for i, v in enumerate(sched.a)), sched.b)
    assert not all(r["integral_b"] for r in gauge.verify_gauge_schedule(g, 1, bumped))


def test_gauge_json_round_trip():
    for g in (gauge.Power(Fraction(1, 2)), gauge.PowerLog(Fraction(1, 2), 1)):
        assert gauge.from_json(gauge.to_json(g)) == g


def test_powerlog_is_monotone():
    assert gauge.is_monotone(gauge.PowerLog(Fraction(1, 2), 1))


weights = st.lists(st.integers(1, 5), min_size=2, max_size=3).map(lambda ws: [Fraction(w, sum(ws)) for w in ws])


@given(weights, st.integers(1, 3))
def test_pushforward_matches_oracle(w, depth):
    tree = ultra.weighted(w, depth)
    ref = oracles.ultra_intervals(w, depth)
    for row in ultra.pushforward_check(tree):
        assert row["ok"]
        assert row["interval"] == ref[tuple(row["node"])]


@given(weights, st.integers(1, 3))
def test_order_is_one_monotone(w, depth):
    tree = ultra.weighted(w, depth)
    assert ultra.check_one_monotone(tree)
    assert ultra.check_balls(tree)


@pytest.mark.parametrize("b", [2, 3, 4, 5])
def test_uniform_holder_exponent(b):
    prof = ultra.holder_profile(ultra.uniform(b, 3))
    assert prof.min_exponent == pytest.approx(math.log(b) / math.log(2), abs=1e-12)
    # brute force over all pairs agrees
    assert prof.exponents.min() == pytest.approx(prof.min_exponent, abs=1e-9)


def test_ultra_json_round_trip():
    tree = ultra.weighted([Fraction(1, 3), Fraction(2, 3)], 2)
    back = ultra.from_json(ultra.to_json(tree))
    assert back.masses == tree.masses


@given(st.integers(0, 2**63), st.integers(0, 1000))
def test_rng_streams_are_reproducible(seed, n):
    a = rng.bits(seed, ("X", n), np.arange(16), 3)
    b = rng.bits(seed, ("X", n), np.arange(16), 3)
    assert np.array_equal(a, b) and a.max() < 8
    u = rng.uniform(seed, ("Y", n), np.arange(16))
    assert ((0 <= u) & (u < 1)).all()


def test_rng_streams_are_separate():
    assert not np.array_equal(rng.u64(1, ("X", 1), np.arange(8)), rng.u64(1, ("Y", 1), np.arange(8)))
    g1, g2 = rng.generator(5, "f"), rng.generator(5, "f")
    assert g1.integers(0, 2**32) == g2.integers(0, 2**32)
