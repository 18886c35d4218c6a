import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gauduchon.catalog import flat_metric, torus_positive_gamma1, torus_profiles
from gauduchon.errors import ArgumentError
from gauduchon.forms import ddbar, hermitian_form
from gauduchon.grid import GridFunction, GridShape, dim_of
from gauduchon.metric import (HermitianMetric, OneFormPair, b1_form, classify, differential,
                              grad_norm_sq, integral_criterion, laplacian, laplacian_form,
                              nonlinear_F, pair, phi_k)
from helpers import random_field, random_metric

X1, X3 = dim_of(1), dim_of(3)


def on(dim, points, fn):
    s = GridShape.active(3, {dim: points})
    return GridFunction(s, fn(s.coordinate(dim)))


def test_flat_laplacian_of_cosine():
    h = on(X1, 32, np.cos)
    out = laplacian(flat_metric(), h, check=True)
    assert (out + h * 0.25).sup_norm() <= 1e-13


def test_laplacian_of_constant():
    w = random_metric(np.random.default_rng(0))
    assert laplacian(w, GridFunction.constant(GridShape.scalar(3), 3.0)).sup_norm() == 0.0


def test_diagonal_metric_laplacian_only_sees_g33():
    w = torus_positive_gamma1(1.0, 64)
    h = on(X3, 64, lambda x: np.sin(2 * x))
    want = on(X3, 64, lambda x: -np.sin(2 * x)).values
    assert np.max(np.abs(laplacian(w, h).values - want)) <= 1e-12


def test_grad_norm_flat_sine():
    h = on(X1, 32, np.sin)
    want = on(X1, 32, lambda x: 0.25 * np.cos(x) ** 2)
    assert (grad_norm_sq(flat_metric(), h) - want).sup_norm() <= 1e-14


def test_metric_rejects_indefinite_and_nonhermitian():
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    with pytest.raises(ArgumentError):
        HermitianMetric.from_matrix(3, {(1, 1): one, (2, 2): one, (3, 3): one * -1.0})
    bad = hermitian_form({(1, 1): one, (2, 2): one, (3, 3): one, (1, 2): one * 0.5,
                          (2, 1): one * 0.2}, 3)
    with pytest.raises(ArgumentError):
        HermitianMetric(bad)


def test_missing_conjugate_entry_defaults():
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    w = HermitianMetric.from_matrix(3, {(1, 1): one, (2, 2): one, (3, 3): one, (1, 2): one * 0.3j})
    assert w.matrix[(2, 1)].values.item() == pytest.approx(-0.3j)


def test_flat_has_no_torsion_terms():
    w = flat_metric()
    for k in (1, 2):
        assert phi_k(w, k).sup_norm() == 0.0
        assert b1_form(w, k).is_zero()
    rep = classify(w, 1e-12)
    assert rep.is_kahler and rep.is_balanced and rep.is_gauduchon and rep.is_pluriclosed
    assert all(rep.is_k_gauduchon(k) for k in (1, 2))
    assert integral_criterion(w.form, 1) == 0.0


def test_torus_phi_closed_form():
    C = 1.0
    w = torus_positive_gamma1(C, 256)
    xi, eta, zeta, x = torus_profiles(C, 256)
    kappa = xi[64] - 1.0
    k = np.fft.fftfreq(256, 1 / 256)
    zp = np.fft.ifft(1j * k * np.fft.fft(zeta)).real
    zpp = np.fft.ifft(-(k ** 2) * np.fft.fft(zeta)).real
    want = (-kappa * np.sin(x) / xi + zpp + zp ** 2) / 8
    got = phi_k(w, 1).values.ravel()
    assert np.max(np.abs(got - want)) <= 1e-10
    assert got.min() >= 1 / 8 - 1e-6


def test_torus_b1_is_x3_only():
    B = b1_form(flat_metric(), 1)
    assert B.is_zero()
    B = b1_form(torus_positive_gamma1(1.0, 64), 1)
    for j in (1, 2):
        assert B.dz[j - 1] is None or B.dz[j - 1].sup_norm() <= 1e-14
    assert B.dz[2].shape.active_dims == (X3,)
    assert B.reality_residual() <= 1e-13


def test_classify_torus():
    w = torus_positive_gamma1(1.0, 256)
    rep = classify(w, 1e-8)
    assert not rep.is_kahler
    assert not rep.is_k_gauduchon(1)
    assert rep.k_gauduchon_residuals[1] >= (1 / 8) * 0.25
    assert rep.k_gauduchon_residuals[2] == pytest.approx(ddbar(w.power(2)).sup_norm(), rel=1e-12)
    d = rep.to_dict()
    assert d["is_kahler"] is False and set(d["k_gauduchon"]) == {"1", "2"}


def test_integral_criterion_rejects_indefinite():
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    with pytest.raises(ArgumentError):
        integral_criterion(hermitian_form({(1, 1): one, (2, 2): one * -0.5}, 3), 1)
    with pytest.raises(ArgumentError):
        integral_criterion(flat_metric().form, 3)


def test_one_form_json_roundtrip():
    B = b1_form(torus_positive_gamma1(1.0, 32), 1)
    back = OneFormPair.from_json(B.to_json())
    assert all((a is None) == (b is None) for a, b in zip(B.dz, back.dz))
    assert (back.dz[2] - B.dz[2]).sup_norm() == 0.0


seeds = st.integers(0, 10 ** 6)


@given(seeds, st.sampled_from([1, 2]))
def test_F_decomposition(seed, k):
    rng = np.random.default_rng(seed)
    w, v = random_metric(rng), random_field(rng)
    dec = laplacian(w, v) + grad_norm_sq(w, v) + pair(w, b1_form(w, k), differential(v)) + phi_k(w, k)
    assert (nonlinear_F(w, k, v) - dec).sup_norm() <= 1e-9


@given(seeds)
def test_laplacian_two_paths(seed):
    rng = np.random.default_rng(seed)
    w, h = random_metric(rng), random_field(rng)
    assert (laplacian(w, h) - laplacian_form(w, h)).sup_norm() <= 1e-9


@given(seeds, st.floats(-2, 2))
def test_F_at_constants_is_phi(seed, c0):
    rng = np.random.default_rng(seed)
    w = random_metric(rng)
    phi = phi_k(w, 1)
    const = GridFunction.constant(GridShape.scalar(3), c0)
    assert (nonlinear_F(w, 1, const) - phi).sup_norm() <= 1e-12 * (1 + phi.sup_norm())


@given(seeds)
def test_pair_symmetric_and_grad_nonnegative(seed):
    rng = np.random.default_rng(seed)
    w = random_metric(rng)
    a, b = differential(random_field(rng)), differential(random_field(rng))
    assert (pair(w, a, b) - pair(w, b, a)).sup_norm() <= 1e-15
    assert grad_norm_sq(w, random_field(rng)).min() >= -1e-15
