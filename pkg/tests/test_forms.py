import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gauduchon.errors import ArgumentError, SingularVolumeError
from gauduchon.forms import (Form, conformal_integral_identity, d, ddbar, del_, delbar, dz,
                             integrate_top, power, ratio_to_volume, scalar_form, sort_sign,
                             top_coefficient, unit, wedge)
from gauduchon.grid import GridFunction, GridShape, dim_of
from gauduchon.metric import HermitianMetric
from helpers import n_modes, random_field, random_metric, shape_on, trig

N = 3
SHAPE = shape_on((0, 4), points=16)


def flat():
    return HermitianMetric.flat(N).form


def diag_x3(xi, eta):
    s = GridShape.active(3, {dim_of(3): xi.size})
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    return HermitianMetric.from_matrix(3, {(1, 1): GridFunction(s, xi.reshape(s.sizes)),
                                           (2, 2): GridFunction(s, eta.reshape(s.sizes)),
                                           (3, 3): one}).form


def test_sort_sign():
    assert sort_sign((1, 2, 3)) == ((1, 2, 3), 1)
    assert sort_sign((2, 1, 3)) == ((1, 2, 3), -1)
    assert sort_sign((3, 1, 2)) == ((1, 2, 3), 1)
    assert sort_sign((1, 1)) == (None, 0)


def test_pairs_of_two_forms_commute():
    a = wedge(dz(N, 1), dz(N, 1, True))
    b = wedge(dz(N, 2), dz(N, 2, True))
    ab, ba = wedge(a, b), wedge(b, a)
    assert ab.coeffs.keys() == ba.coeffs.keys() == {((1, 2), (1, 2))}
    # stored in the block basis dz1 dz2 dzbar1 dzbar2: one transposition from the interleaved order
    assert ab.coeff((1, 2), (1, 2)).values.item() == -1.0
    assert (ab - ba).is_zero() or (ab - ba).sup_norm() == 0.0


def test_reordering_sign_for_coframe_product():
    # (dz1 dz2) ^ (dzbar1 dzbar2) against dz1 dzbar1 dz2 dzbar2
    a = wedge(wedge(dz(N, 1), dz(N, 2)), wedge(dz(N, 1, True), dz(N, 2, True)))
    b = wedge(wedge(dz(N, 1), dz(N, 1, True)), wedge(dz(N, 2), dz(N, 2, True)))
    assert a.coeff((1, 2), (1, 2)).values.item() == -b.coeff((1, 2), (1, 2)).values.item()


def test_scalar_ddbar_anticommutes():
    u = scalar_form(random_field(np.random.default_rng(1), points=16))
    total = del_(delbar(u)) + delbar(del_(u))
    assert total.sup_norm() <= 1e-12


def test_flat_volume_is_n_factorial_dV():
    w3 = power(flat(), 3)
    assert integrate_top(w3).real == pytest.approx(math.factorial(3) * (2 * math.pi) ** 6, rel=1e-14)
    assert abs(integrate_top(w3).imag) <= 1e-9


def test_power_zero_and_bilinearity():
    assert power(flat(), 0).coeff((), ()).values.item() == 1.0
    rng = np.random.default_rng(3)
    a, b = random_metric(rng, points=16).form, random_metric(rng, points=16).form
    t = 0.37
    lhs = power(a + b * t, 2)
    rhs = power(a, 2) + wedge(a, b) * (2 * t) + power(b, 2) * (t * t)
    assert (lhs - rhs).sup_norm() <= 1e-13


def test_ratio_to_volume():
    w = random_metric(np.random.default_rng(4), points=16)
    assert (ratio_to_volume(w.volume, w.volume) - 1.0).sup_norm() <= 1e-14
    dV = power(flat(), 3) * (1.0 / 6.0)
    assert (ratio_to_volume(dV * 6.0, power(flat(), 3)) - 1.0).sup_norm() == 0.0
    degenerate = Form(3, 3, 3, {((1, 2, 3), (1, 2, 3)): GridFunction.constant(GridShape.scalar(3), 0.0)})
    with pytest.raises(SingularVolumeError):
        ratio_to_volume(dV, degenerate)


def test_torus_ddbar_formula():
    m = 64
    x = 2 * np.pi * np.arange(m) / m
    xi, eta = 1 + 0.5 * np.sin(x), np.exp(0.3 * np.cos(x))
    xi2 = -0.5 * np.sin(x)
    eta2 = eta * (0.09 * np.sin(x) ** 2 - 0.3 * np.cos(x))
    w = diag_x3(xi, eta)
    lhs = wedge(ddbar(w), w) * 0.5j
    dV = power(flat(), 3) * (1.0 / 6.0)
    got = ratio_to_volume(lhs, dV).values.ravel()
    assert np.max(np.abs(got - (eta * xi2 / 4 + xi * eta2 / 4))) <= 1e-10
    # against omega^3 = 6 xi eta dV the ratio is (xi''/xi + eta''/eta)/24
    ratio = ratio_to_volume(lhs, power(w, 3)).values.ravel()
    assert np.max(np.abs(ratio - (xi2 / xi + eta2 / eta) / 24)) <= 1e-10


def test_wrong_bidegree():
    with pytest.raises(ArgumentError):
        Form(3, 1, 1, {((1, 2), (1,)): GridFunction.constant(GridShape.scalar(3), 1.0)})
    with pytest.raises(ArgumentError):
        dz(3, 1) + dz(3, 1, True)
    with pytest.raises(ArgumentError):
        power(dz(3, 1), 2)
    with pytest.raises(ArgumentError):
        top_coefficient(dz(3, 1))


# -- random sparse forms ----------------------------------------------------------
def _keys(p, q):
    return [(I, J) for I in itertools.combinations(range(1, N + 1), p)
            for J in itertools.combinations(range(1, N + 1), q)]


@st.composite
def forms(draw, max_deg=2):
    p = draw(st.integers(0, max_deg))
    q = draw(st.integers(0, max_deg - p))
    keys = _keys(p, q)
    chosen = draw(st.lists(st.sampled_from(keys), min_size=1, max_size=3, unique=True))
    m = n_modes(2)
    coeffs = {}
    for key in chosen:
        re = draw(st.lists(st.floats(-1, 1), min_size=m, max_size=m))
        im = draw(st.lists(st.floats(-1, 1), min_size=m, max_size=m))
        coeffs[key] = trig(SHAPE, re) + trig(SHAPE, im) * 1j
    return Form(N, p, q, coeffs)


@given(forms(), forms())
def test_graded_commutativity(a, b):
    sign = (-1) ** (a.degree * b.degree)
    assert (wedge(a, b) - wedge(b, a) * sign).sup_norm() <= 1e-12 * (1 + a.sup_norm() * b.sup_norm())


@given(forms())
def test_del_squares_to_zero(a):
    assert del_(del_(a)).sup_norm() <= 1e-12 * (1 + a.sup_norm())
    assert delbar(delbar(a)).sup_norm() <= 1e-12 * (1 + a.sup_norm())


@given(forms(), forms())
def test_graded_leibniz(a, b):
    lhs = del_(wedge(a, b))
    rhs = wedge(del_(a), b) + wedge(a, del_(b)) * ((-1) ** a.degree)
    assert (lhs - rhs).sup_norm() <= 1e-11 * (1 + a.sup_norm() * b.sup_norm())


@given(forms())
def test_conjugation_swaps_del_and_delbar(a):
    diff = del_(a).conj() - delbar(a.conj())
    assert set(del_(a).conj().coeffs) == set(delbar(a.conj()).coeffs)
    assert diff.sup_norm() <= 1e-13 * (1 + a.sup_norm())


def test_d_returns_both_parts():
    u = scalar_form(random_field(np.random.default_rng(2), points=16))
    a, b = d(u)
    assert a.bidegree == (1, 0) and b.bidegree == (0, 1)


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_conformal_integral_identity(seed, k):
    rng = np.random.default_rng(seed)
    w = random_metric(rng)
    v = random_field(rng)
    lhs, rhs = conformal_integral_identity(w.form, k, v)
    assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), abs(rhs), 1e-300)


def test_unit_is_scalar_one():
    assert unit(2).bidegree == (0, 0)
