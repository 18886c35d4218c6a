import math

import numpy as np
import pytest

from gauduchon.catalog import (EXAMPLES, bump_f, bump_family, bump_g, bump_grid_factors,
                               bump_product_formula, bump_semimetric, chi_prime, family,
                               negative_gamma1_search, torus_kappa, torus_kappa_quadrature,
                               torus_positive_gamma1, torus_profiles)
from gauduchon.errors import ArgumentError
from gauduchon.grid import GridFunction, GridShape, dim_of
from gauduchon.metric import HermitianMetric, integral_criterion
from gauduchon.solver import gamma_k

# 1-D adaptive quadrature of the chart integrals
INT_FG = 8.938111764266729e-09
INT_MINUS_FP_GP = 9.561089601841258e-06


def test_kappa_closed_form_and_quadrature():
    assert torus_kappa(1.0) == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert abs(torus_kappa_quadrature(1.0) - math.sqrt(3) / 2) <= 1e-9


@pytest.mark.parametrize("C", [0.25, 1.0, 2.0])
def test_kappa_matches_quadrature(C):
    assert abs(torus_kappa(C) - torus_kappa_quadrature(C)) <= 1e-9


@pytest.mark.parametrize("C", [0.0, -1.0])
def test_kappa_needs_positive_C(C):
    with pytest.raises(ArgumentError):
        torus_kappa(C)


def test_torus_defining_inequality():
    xi, eta, zeta, x = torus_profiles(1.0, 256)
    k = np.fft.fftfreq(256, 1 / 256)
    xi2 = np.fft.ifft(-(k ** 2) * np.fft.fft(xi)).real
    eta2 = np.fft.ifft(-(k ** 2) * np.fft.fft(eta)).real
    assert np.min(xi2 / xi + eta2 / eta) >= 1 - 1e-8


def test_small_C_is_nearly_flat():
    assert torus_kappa(1e-6) < 2e-3
    assert abs(gamma_k(torus_positive_gamma1(1e-6, 64), 1).gamma) <= 1e-5


def test_bump_profiles():
    t = np.linspace(-1, 1, 4001)
    prod = chi_prime(t, -1 / 3, 1 / 3) * chi_prime(t, 0, 2 / 3)
    assert np.all(prod <= 0)
    inside = (t > 0) & (t < 1 / 3)
    # exp(-1/d) underflows within ~0.02 of the support edges
    interior = (t > 0.02) & (t < 1 / 3 - 0.02)
    assert np.all(prod[interior] < 0) and np.all(prod[~inside] == 0)
    assert np.all(bump_f(t) >= 0) and np.all(bump_g(t) >= 0)


def test_bump_product_formula():
    ref = bump_product_formula()
    assert ref["int_fg"] == pytest.approx(INT_FG, rel=1e-8)
    assert ref["int_minus_fprime_gprime"] == pytest.approx(INT_MINUS_FP_GP, rel=1e-8)
    assert ref["product"] > 0


def test_bump_grid_integral_factorizes():
    sizes = (6, 6, 6, 6, 16, 16)
    val = integral_criterion(bump_semimetric(sizes), 1)
    g = bump_grid_factors(sizes)
    assert val == pytest.approx(g["int_fg"] * g["int_minus_fprime_gprime"], rel=1e-4)
    assert abs(val / (INT_FG * INT_MINUS_FP_GP) - 1) <= 0.02


def test_bump_family_floor():
    w = bump_family(0.05, (4,) * 6)
    assert isinstance(w, HermitianMetric) and w.eigen_floor >= 0.05 - 1e-15
    with pytest.raises(ArgumentError):
        bump_family(0.0, (4,) * 6)


def test_screen_integral_for_equal_profiles():
    kappa, m = 0.6, 64
    s = GridShape.active(3, {dim_of(3): m})
    xi = GridFunction(s, 1 + kappa * np.sin(s.coordinate(dim_of(3))))
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    w = HermitianMetric.from_matrix(3, {(1, 1): xi, (2, 2): xi, (3, 3): one})
    want = -(math.pi / 2) * kappa ** 2 * (2 * math.pi) ** 5
    assert integral_criterion(w.form, 1) == pytest.approx(want, rel=1e-12)


def test_family_at_zero_is_flat():
    spec = family("diagonal-x3", 16)
    assert abs(gamma_k(spec.build(np.zeros(spec.n_params)), 1).gamma) <= 1e-12
    with pytest.raises(ArgumentError):
        family("nope")


def test_search_is_deterministic():
    a = negative_gamma1_search(4, "diagonal-x3", seed=7)
    b = negative_gamma1_search(4, "diagonal-x3", seed=7)
    assert a.to_dict() == b.to_dict()
    assert len(a.log) == 4 and a.success == (a.best_gamma < -a.tol)


@pytest.mark.parametrize("name", sorted(n for n, e in EXAMPLES.items() if e.kind == "grid"))
def test_grid_examples_are_metrics(name):
    assert isinstance(EXAMPLES[name].builder(), HermitianMetric)
