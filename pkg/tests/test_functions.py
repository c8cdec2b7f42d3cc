from fractions import Fraction

import numpy as np
from hypothesis import given, strategies as st

from fiberdim import functions

values = st.lists(st.fractions(-2, 2), min_size=2, max_size=12)


@given(values, st.sampled_from([8, 16, 33]))
def test_grid_values_match_pointwise(ys, G):
    xs = [Fraction(i, len(ys) - 1) for i in range(len(ys))]
    f = functions.from_points(xs, ys)
    assert functions.grid_values(f, G) == [f(Fraction(i, G)) for i in range(G + 1)]


@given(values)
def test_float_and_exact_evaluation_agree(ys):
    xs = [Fraction(i, len(ys) - 1) for i in range(len(ys))]
    f = functions.from_points(xs, ys)
    grid = np.linspace(0, 1, 37)
    assert np.allclose(f.values(grid), [float(f(Fraction(x))) for x in grid], atol=1e-12)


@given(values)
def test_lipschitz_is_max_slope(ys):
    xs = [Fraction(i, len(ys) - 1) for i in range(len(ys))]
    f = functions.from_points(xs, ys)
    assert f.lipschitz() == max(abs(b - a) * (len(ys) - 1) for a, b in zip(ys, ys[1:]))


def test_json_round_trip():
    f = functions.from_points([0, Fraction(1, 3), 1], [1, -1, Fraction(1, 2)])
    assert functions.from_json(functions.to_json(f)) == f
    assert functions.zero().is_zero
