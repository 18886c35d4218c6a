import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gauduchon.errors import ArgumentError
from gauduchon.grid import GridFunction, GridShape, coordinate_function, dim_of
from helpers import n_modes, shape_on, trig

X3 = dim_of(3)


def x3_shape(points):
    return GridShape.active(3, {X3: points})


def test_derivative_of_sine():
    s = x3_shape(64)
    x = s.coordinate(X3)
    du = GridFunction(s, np.sin(x)).derivative(X3)
    assert np.max(np.abs(du.values - np.cos(x))) <= 1e-12


@pytest.mark.parametrize("dim", range(6))
def test_derivative_of_constant(dim):
    u = GridFunction.constant(GridShape(3, (8,) * 6), 5.0)
    assert u.derivative(dim).sup_norm() == 0.0


def test_single_mode_derivative_exact():
    s = GridShape.active(3, {0: 32})
    x = s.coordinate(0)
    du = GridFunction(s, np.exp(1j * x)).derivative(0)
    assert np.max(np.abs(du.values - 1j * np.exp(1j * x))) <= 1e-13


def test_integrals():
    assert GridFunction.constant(GridShape.scalar(3), 1.0).integrate() == pytest.approx((2 * math.pi) ** 6)
    s = x3_shape(64)
    x = s.coordinate(X3)
    assert abs(GridFunction(s, np.sin(x)).integrate()) <= 1e-13 * (2 * math.pi) ** 6
    val = GridFunction(s, np.sin(x) ** 2).integrate()
    assert abs(val / (0.5 * (2 * math.pi) ** 6) - 1) <= 1e-12


def test_holomorphic_derivative_examples():
    s = x3_shape(32)
    x = s.coordinate(X3)
    u = GridFunction(s, np.sin(x))
    assert np.max(np.abs(u.holomorphic_derivative(3).values - 0.5 * np.cos(x))) <= 1e-13
    c = GridFunction.constant(s, 2.0)
    assert c.holomorphic_derivative(3, True).sup_norm() == 0.0
    s1 = GridShape.active(3, {0: 16})
    x1 = s1.coordinate(0)
    e = GridFunction(s1, np.exp(1j * x1))
    want = 0.5j * np.exp(1j * x1)
    assert np.max(np.abs(e.holomorphic_derivative(1).values - want)) <= 1e-13
    assert np.max(np.abs(e.holomorphic_derivative(1, True).values - want)) <= 1e-13


@pytest.mark.parametrize("j", [0, 4])
def test_bad_complex_index(j):
    with pytest.raises(ArgumentError):
        GridFunction.constant(x3_shape(8), 1.0).holomorphic_derivative(j)


def test_incompatible_shapes():
    a = GridFunction.constant(x3_shape(8), 1.0)
    b = GridFunction.constant(x3_shape(12), 1.0)
    with pytest.raises(ArgumentError):
        a + b


def test_broadcasting_keeps_small_storage():
    a = coordinate_function(GridShape(3, (4, 1, 1, 1, 8, 1)), 4)
    assert a.values.shape == (1, 1, 1, 1, 8, 1)


def test_json_roundtrip():
    s = x3_shape(8)
    u = GridFunction(s, np.exp(1j * s.coordinate(X3)))
    back = GridFunction.from_json(u.to_json())
    assert back.shape == u.shape and np.array_equal(back.values, u.values)


def test_second_derivative_keeps_nyquist():
    s = x3_shape(8)
    u = GridFunction(s, np.cos(4 * s.coordinate(X3)))
    assert np.allclose(u.second_derivative(X3).values, -16 * u.values, atol=1e-12)
    assert u.derivative(X3).sup_norm() <= 1e-12


coef = st.lists(st.floats(-1, 1, allow_nan=False), min_size=n_modes(2), max_size=n_modes(2))


@given(coef)
def test_derivatives_commute(c):
    u = trig(shape_on((0, 4), points=16), c)
    a = u.derivative(0).derivative(4)
    b = u.derivative(4).derivative(0)
    assert (a - b).sup_norm() <= 1e-12


@given(coef, st.sampled_from([0, 4]))
def test_derivative_integrates_to_zero(c, d):
    u = trig(shape_on((0, 4), points=16), c)
    assert abs(u.derivative(d).integrate()) <= 1e-12 * (2 * math.pi) ** 6


@given(coef, coef)
def test_conjugate_swaps_del_and_delbar(a, b):
    s = shape_on((0, 4), points=16)
    u = trig(s, a) + trig(s, b) * 1j
    lhs = u.conj().holomorphic_derivative(1)
    rhs = u.holomorphic_derivative(1, True).conj()
    assert (lhs - rhs).sup_norm() <= 1e-14


@given(coef)
def test_mixed_matches_composition_when_resolved(c):
    u = trig(shape_on((0, 4), points=16), c)
    for i, j in [(1, 1), (1, 3), (3, 3)]:
        composed = u.holomorphic_derivative(j, True).holomorphic_derivative(i)
        assert (u.mixed_derivative(i, j) - composed).sup_norm() <= 1e-13
