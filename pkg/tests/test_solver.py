import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gauduchon.catalog import flat_metric, torus_positive_gamma1
from gauduchon.errors import ArgumentError, NonConvergenceError
from gauduchon.grid import GridFunction, GridShape, dim_of
from gauduchon.metric import OneFormPair, differential, grad_norm_sq, laplacian, pair
from gauduchon.solver import (PsiFunction, SolveOptions, bisect_sign_change, conformal_bounds_check,
                              find_k_gauduchon, gamma_k, random_band_limited, solve_semilinear)
from helpers import random_field, random_metric

X1, X3 = dim_of(1), dim_of(3)
TORUS_GAMMA1 = 0.2051606120978  # C = 1, 256 points; conservative and semilinear paths agree


def line(dim, points, fn):
    s = GridShape.active(3, {dim: points})
    return GridFunction(s, fn(s.coordinate(dim)))


def v_integral(w, v):
    return float(w.average(v))


# -- semilinear ------------------------------------------------------------------
def test_zero_rhs_gives_zero():
    w = torus_positive_gamma1(1.0, 64)
    B = differential(line(X3, 64, np.sin))
    rep = solve_semilinear(w, B, GridFunction.constant(GridShape.scalar(3), 0.0))
    assert rep.v.sup_norm() <= 1e-12 and abs(rep.c) <= 1e-12


def test_small_rhs_matches_poisson():
    eps = 1e-4
    w = flat_metric(3, (16, 1, 1, 1, 1, 1))
    f = line(X1, 16, lambda x: eps * np.cos(x))
    rep = solve_semilinear(w, OneFormPair.zero(3), f)
    want = line(X1, 16, lambda x: -4 * eps * np.cos(x))
    assert (rep.v - want).sup_norm() <= 10 * eps ** 2
    assert rep.residual <= 1e-10


def test_psi_shift_moves_c_only():
    w = torus_positive_gamma1(1.0, 64)
    f = line(X3, 64, lambda x: 0.3 * np.cos(x) + 0.1 * np.sin(2 * x))
    B = differential(line(X3, 64, lambda x: 0.2 * np.sin(x)))
    a = solve_semilinear(w, B, f)
    b = solve_semilinear(w, B, f, PsiFunction.linear(1.0))
    assert (a.v - b.v).sup_norm() <= 1e-10
    assert b.c - a.c == pytest.approx(1.0, abs=1e-10)


def test_solution_satisfies_equation():
    rng = np.random.default_rng(5)
    w = random_metric(rng)
    f = random_field(rng)
    B = differential(random_field(rng))
    rep = solve_semilinear(w, B, f)
    lhs = laplacian(w, rep.v) + grad_norm_sq(w, rep.v) + pair(w, B, differential(rep.v))
    fc = f - float(w.average(f))
    assert (lhs - fc - rep.c).sup_norm() <= 1e-9
    assert abs(v_integral(w, rep.v)) <= 1e-10
    assert rep.c_within_bounds


def test_nonzero_mean_rhs_is_adjusted_with_warning():
    w = flat_metric(3, (16, 1, 1, 1, 1, 1))
    rep = solve_semilinear(w, OneFormPair.zero(3), line(X1, 16, lambda x: 1 + 0.1 * np.cos(x)))
    assert rep.warnings and "average" in rep.warnings[0]


def test_psi_table_and_certificate():
    ts = np.linspace(0, 10, 21)
    psi = PsiFunction.table(ts, ts + 0.1 * ts ** 2, mu=1.0, nu=1.0)
    assert psi.certificate(1, 10)["holds"]
    w = torus_positive_gamma1(1.0, 64)
    rep = solve_semilinear(w, OneFormPair.zero(3), line(X3, 64, lambda x: 0.2 * np.cos(x)), psi)
    assert rep.residual <= 1e-10 and rep.diagnostics["psi_prime_min"] > 0


@pytest.mark.parametrize("mu, nu", [(0.5, 1.0), (1.0, 0.0), (0.2, 1.0)])
def test_psi_growth_parameters(mu, nu):
    with pytest.raises(ArgumentError):
        PsiFunction(lambda t: t, lambda t: 1.0, mu=mu, nu=nu)


def test_options_json():
    with pytest.raises(ArgumentError):
        SolveOptions.from_json({"nope": 1})
    with pytest.raises(ArgumentError):
        SolveOptions(min_step=0)
    o = SolveOptions.from_json({"newton_tol": 1e-9, "initial_guess": {"random": 3}})
    assert o.to_json()["newton_tol"] == 1e-9


def test_stall_reports_history():
    w = torus_positive_gamma1(1.0, 64)
    f = line(X3, 64, lambda x: 5 * np.cos(x))
    with pytest.raises(NonConvergenceError) as exc:
        solve_semilinear(w, OneFormPair.zero(3), f, opts=SolveOptions(max_newton=1, min_step=0.25))
    assert exc.value.history and not exc.value.history[-1]["accepted"]


def test_gmres_path_matches_dense():
    w = random_metric(np.random.default_rng(9))
    dense = gamma_k(w, 1)
    krylov = gamma_k(w, 1, SolveOptions(dense_limit=16))
    assert dense.diagnostics["dense"] and not krylov.diagnostics["dense"]
    assert abs(dense.gamma - krylov.gamma) <= 1e-10


# -- gamma_k ---------------------------------------------------------------------
@pytest.mark.parametrize("k", [1, 2])
def test_flat_gamma_is_zero(k):
    rep = gamma_k(flat_metric(3, (8, 1, 1, 1, 8, 1)), k)
    assert abs(rep.gamma) <= 1e-12 and rep.v.max() - rep.v.min() <= 1e-12


def test_torus_gamma1_value():
    w = torus_positive_gamma1(1.0, 256)
    for method in ("conservative", "semilinear"):
        rep = gamma_k(w, 1, SolveOptions(method=method))
        assert rep.gamma == pytest.approx(TORUS_GAMMA1, abs=1e-10)
        assert rep.spread <= 1e-8 and rep.c_within_bounds
    coarse = gamma_k(torus_positive_gamma1(1.0, 128), 1)
    assert abs(coarse.gamma - TORUS_GAMMA1) <= 1e-6


@pytest.mark.parametrize("C", [0.25, 0.5, 1.0, 2.0])
def test_torus_gamma1_positive(C):
    rep = gamma_k(torus_positive_gamma1(C, 128), 1)
    assert rep.gamma > 0 and rep.residual <= 1e-10


def test_conservative_stall_falls_back():
    # eta spans four decades at C = 2; F's roundoff floor sits near 1e-9
    rep = gamma_k(torus_positive_gamma1(2.0, 256), 1)
    assert rep.method == "semilinear" and rep.warnings
    assert rep.gamma == pytest.approx(0.7215035250857, abs=1e-10)


@given(st.integers(0, 10 ** 6))
def test_top_index_gamma_vanishes(seed):
    rep = gamma_k(random_metric(np.random.default_rng(seed), dims=(4,)), 2)
    assert abs(rep.gamma) <= 1e-10


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_gamma_formulas_agree(seed, k):
    w = random_metric(np.random.default_rng(seed), dims=(0, 4))
    rep = gamma_k(w, k)
    assert rep.spread <= 1e-8
    assert abs(v_integral(w, rep.v)) <= 1e-10


def test_uniqueness_from_two_guesses():
    w = torus_positive_gamma1(1.0, 128)
    a = gamma_k(w, 1)
    b = gamma_k(w, 1, SolveOptions(initial_guess={"random": 11, "amplitude": 0.3}))
    assert abs(a.gamma - b.gamma) <= 1e-8
    d = a.v - b.v
    assert (d - float(d.mean())).sup_norm() <= 1e-7


# -- conformal sandwich -----------------------------------------------------------
def test_constant_rho_scales_gamma():
    w = torus_positive_gamma1(1.0, 128)
    rep = conformal_bounds_check(w, GridFunction.constant(GridShape.scalar(3), 0.7), 1)
    assert rep.gamma_conformal == pytest.approx(math.exp(-0.7) * rep.gamma, rel=1e-8)
    assert rep.holds and rep.sign_equal


def test_kahler_sandwich_is_zero():
    w = flat_metric(3, (1, 1, 1, 1, 32, 1))
    rep = conformal_bounds_check(w, line(X3, 32, lambda x: 0.3 * np.sin(x)), 1)
    assert abs(rep.gamma) <= 1e-8 and abs(rep.gamma_conformal) <= 1e-8 and rep.holds


# -- bisection --------------------------------------------------------------------
def synthetic(root, scale=1.0):
    calls = []

    def evaluate(t):
        calls.append(t)
        return SimpleNamespace(gamma=scale * math.tanh(3 * (t - root)))
    return evaluate, calls


@given(st.floats(0.05, 0.95), st.sampled_from([1e-3, 1e-6, 1e-9]))
def test_bisection_contract(root, tol):
    evaluate, _ = synthetic(root)
    t, rep, history = bisect_sign_change(evaluate, tol)
    assert abs(rep.gamma) <= tol
    assert history[0]["gamma"] * history[1]["gamma"] < 0


def test_bisection_refinement_is_monotone():
    finals = []
    for tol in (1e-3, 5e-4, 2.5e-4, 1.25e-4):
        evaluate, _ = synthetic(0.3141)
        finals.append(abs(bisect_sign_change(evaluate, tol)[1].gamma))
    assert all(f <= tol for f, tol in zip(finals, (1e-3, 5e-4, 2.5e-4, 1.25e-4)))


def test_bisection_errors():
    with pytest.raises(ArgumentError):
        bisect_sign_change(lambda t: SimpleNamespace(gamma=1.0 + t), 1e-6)
    with pytest.raises(NonConvergenceError) as exc:
        bisect_sign_change(synthetic(0.5 + 1e-9)[0], 1e-14, max_iter=5)
    assert len(exc.value.history) == 7


def test_find_k_gauduchon_same_endpoints():
    w = torus_positive_gamma1(1.0, 64)
    with pytest.raises(ArgumentError):
        find_k_gauduchon(w, w, 1, 1e-6)


def test_random_band_limited_is_deterministic():
    s = GridShape.active(3, {0: 8, 4: 8})
    assert np.array_equal(random_band_limited(s, 4).values, random_band_limited(s, 4).values)
