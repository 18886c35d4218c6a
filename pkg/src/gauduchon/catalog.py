"""Explicit example metrics: the positive torus, the bump semi-metric, invariant coframes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from . import coframe
from .errors import ArgumentError, GauduchonError
from .forms import Form, hermitian_form
from .grid import GridFunction, GridShape, TWO_PI, wavenumbers
from .metric import HermitianMetric, integral_criterion
from .solver import SolveOptions, gamma_k

log = logging.getLogger(__name__)

BUMP_SCALE = 6.0
BUMP_SHIFT = 1.0 / 6.0
ETA_RADIUS = 3.0


def _x3_shape(n_points: int) -> GridShape:
    return GridShape.active(3, {4: n_points})


def flat_metric(n: int = 3, sizes=None) -> HermitianMetric:
    shape = GridShape(n, tuple(sizes)) if sizes is not None else GridShape.scalar(n)
    return HermitianMetric.flat(n, shape)


# -- positive torus example ------------------------------------------------------------
def torus_kappa(C: float) -> float:
    """``kappa`` with ``int_0^{2pi} xi''/xi = 2 pi C`` for ``xi = 1 + kappa sin``."""
    if not C > 0:
        raise ArgumentError(f"C must be positive, got {C}")
    return math.sqrt(1.0 - 1.0 / (1.0 + C) ** 2)


def torus_kappa_quadrature(C: float) -> float:
    """Independent root-find of ``(1/2pi) int dt / (1 + kappa sin t) = 1 + C``."""
    if not C > 0:
        raise ArgumentError(f"C must be positive, got {C}")

    def mean_inverse(kappa):
        # the integrand peaks at t = 3 pi / 2 as kappa -> 1
        val, _ = integrate.quad(lambda t: 1.0 / (1.0 + kappa * math.sin(t)), 0.0, TWO_PI,
                                points=[1.5 * math.pi], epsabs=1e-14, epsrel=1e-13, limit=400)
        return val / TWO_PI - (1.0 + C)

    hi = 0.5
    while mean_inverse(hi) < 0:
        hi = 0.5 * (1.0 + hi)
    return optimize.brentq(mean_inverse, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def torus_profiles(C: float, n_points: int = 256):
    """Samples of ``(xi, eta, zeta, x)`` on ``x_m = 2 pi m / N``."""
    kappa = torus_kappa(C)
    x = TWO_PI * np.arange(n_points) / n_points
    xi = 1.0 + kappa * np.sin(x)
    # zeta'' = C - xi''/xi = C + kappa sin / xi (mean zero by the choice of kappa)
    rhs = C + kappa * np.sin(x) / xi
    rhs = rhs - rhs.mean()
    k = wavenumbers(n_points)
    spec = np.fft.fft(rhs)
    zspec = np.zeros_like(spec)
    nz = k != 0
    zspec[nz] = -spec[nz] / k[nz] ** 2
    zeta = np.fft.ifft(zspec).real
    return xi, np.exp(zeta), zeta, x


def torus_positive_gamma1(C: float = 1.0, n_points: int = 256) -> HermitianMetric:
    """``diag(xi(x3), eta(x3), 1)`` with ``xi''/xi + eta''/eta >= C``."""
    xi, eta, _, _ = torus_profiles(C, n_points)
    shape = _x3_shape(n_points)
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    return HermitianMetric.from_matrix(3, {(1, 1): GridFunction(shape, xi.reshape(shape.sizes)),
                                           (2, 2): GridFunction(shape, eta.reshape(shape.sizes)),
                                           (3, 3): one})


def diagonal_x3_metric(xi: np.ndarray, eta: np.ndarray) -> HermitianMetric:
    shape = _x3_shape(xi.size)
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    return HermitianMetric.from_matrix(3, {(1, 1): GridFunction(shape, xi.reshape(shape.sizes)),
                                           (2, 2): GridFunction(shape, eta.reshape(shape.sizes)),
                                           (3, 3): one})


# -- bump semi-metric -------------------------------------------------------------------
def chi(t, a: float, b: float):
    """``exp(1/(t-b) - 1/(t-a))`` on ``(a, b)``, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > a) & (t < b)
    ti = t[inside]
    out[inside] = np.exp(1.0 / (ti - b) - 1.0 / (ti - a))
    return out


def chi_prime(t, a: float, b: float):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > a) & (t < b)
    ti = t[inside]
    out[inside] = np.exp(1.0 / (ti - b) - 1.0 / (ti - a)) * (-1.0 / (ti - b) ** 2 + 1.0 / (ti - a) ** 2)
    return out


def bump_f(t):
    return chi(t, -1.0 / 3.0, 1.0 / 3.0)


def bump_g(t):
    return chi(t, 0.0, 2.0 / 3.0)


def bump_product_formula() -> dict:
    """``int f g`` and ``int -f'g'`` over the chart by adaptive quadrature."""
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    fg, _ = integrate.quad(lambda t: float(bump_f(t) * bump_g(t)), 0.0, 1.0 / 3.0, **opts)
    mfg, _ = integrate.quad(lambda t: float(-chi_prime(t, -1 / 3, 1 / 3) * chi_prime(t, 0, 2 / 3)),
                            0.0, 1.0 / 3.0, **opts)
    return {"int_fg": fg, "int_minus_fprime_gprime": mfg, "product": fg * mfg}


def _centered(x: np.ndarray) -> np.ndarray:
    """Grid nodes mapped to ``[-pi, pi)``."""
    return (x + math.pi) % TWO_PI - math.pi


def _chart_time(x: np.ndarray, scale: float) -> np.ndarray:
    return BUMP_SHIFT + _centered(x) / scale


def _eta_profile(shape: GridShape, j: int, radius: float) -> np.ndarray:
    """Radial bump on the (x_j, y_j) plane, normalized so its discrete ``int eta^2 = 1``."""
    dx, dy = 2 * (j - 1), 2 * (j - 1) + 1
    X = _centered(shape.coordinate(dx))
    Y = _centered(shape.coordinate(dy))
    r2 = (X ** 2 + Y ** 2) / radius ** 2
    inside = r2 < 1.0
    eta = np.zeros(np.broadcast_shapes(X.shape, Y.shape))
    r2b = np.broadcast_to(r2, eta.shape)
    eta[np.broadcast_to(inside, eta.shape)] = np.exp(-1.0 / (1.0 - r2b[np.broadcast_to(inside, eta.shape)]))
    cell = (TWO_PI / shape.sizes[dx]) * (TWO_PI / shape.sizes[dy])
    norm = math.sqrt(float(np.sum(eta ** 2)) * cell)
    return eta / norm


def bump_coefficients(sizes, scale: float = BUMP_SCALE, radius: float = ETA_RADIUS):
    """``(phi, psi)`` on a 6-D grid: ``eta(z1) eta(z2) f(x3) f(y3)`` and the same with ``g``."""
    shape = GridShape(3, tuple(sizes))
    if any(s < 2 for s in shape.sizes):
        raise ArgumentError("the bump needs every dimension resolved")
    eta = _eta_profile(shape, 1, radius) * _eta_profile(shape, 2, radius)
    t3 = _chart_time(shape.coordinate(4), scale)
    s3 = _chart_time(shape.coordinate(5), scale)
    phi = eta * bump_f(t3) * bump_f(s3)
    psi = eta * bump_g(t3) * bump_g(s3)
    return GridFunction(shape, np.broadcast_to(phi, shape.sizes)), \
        GridFunction(shape, np.broadcast_to(psi, shape.sizes))


def bump_semimetric(sizes=(16,) * 6, scale: float = BUMP_SCALE) -> Form:
    """``(i/2)[phi dz1 ^ dzbar1 + psi dz2 ^ dzbar2]``, a semi-metric (not positive definite).

    The chart coordinate ``t`` is placed at ``x = scale * (t - 1/6)`` so that the
    union of the cutoff supports fills most of one period.
    """
    phi, psi = bump_coefficients(sizes, scale)
    return hermitian_form({(1, 1): phi, (2, 2): psi}, 3)


def bump_family(t: float, sizes=(12,) * 6, scale: float = BUMP_SCALE) -> HermitianMetric:
    """``bump_semimetric + t * flat``."""
    if not t > 0:
        raise ArgumentError(f"t must be positive, got {t}")
    phi, psi = bump_coefficients(sizes, scale)
    one = GridFunction.constant(GridShape.scalar(3), 1.0)
    return HermitianMetric.from_matrix(3, {(1, 1): phi + t, (2, 2): psi + t, (3, 3): one * t})


def bump_grid_factors(sizes, scale: float = BUMP_SCALE) -> dict:
    """The two 1-D factors as the grid sees them (spectral derivative, uniform quadrature)."""
    n3 = sizes[4]
    x = TWO_PI * np.arange(n3) / n3
    t = _chart_time(x, scale)
    f, g = bump_f(t), bump_g(t)
    k = wavenumbers(n3)
    fp = np.fft.ifft(1j * k * np.fft.fft(f)).real
    gp = np.fft.ifft(1j * k * np.fft.fft(g)).real
    h = TWO_PI / n3
    return {"int_fg": float(np.sum(f * g) * h), "int_minus_fprime_gprime": float(-np.sum(fp * gp) * h)}


# -- coframe examples -------------------------------------------------------------------------
IWASAWA_TEXT = """\
generators phi1 phi2 phi3
del phi3 = -phi1^phi2
"""

S5S1_TEXT = """\
generators theta
W^3 = 0
delbar theta = W
"""

ABELIAN_TEXT = """\
generators e1 e2 e3
"""


def iwasawa():
    alg = coframe.parse_algebra(IWASAWA_TEXT)
    omega = coframe.parse_form(alg, "i/2*(phi1^phi1bar + phi2^phi2bar + phi3^phi3bar)")
    return alg, omega


def s5s1():
    alg = coframe.parse_algebra(S5S1_TEXT)
    omega = coframe.parse_form(alg, "W + i/2*theta^thetabar")
    return alg, omega


def abelian_torus():
    alg = coframe.parse_algebra(ABELIAN_TEXT)
    omega = coframe.parse_form(alg, "i/2*(e1^e1bar + e2^e2bar + e3^e3bar)")
    return alg, omega


# -- negative gamma_1 search ------------------------------------------------------------------
@dataclass(frozen=True)
class FamilySpec:
    """A parameterized family of diagonal torus metrics ``diag(xi, eta, 1)``."""

    name: str
    n_params: int
    sizes: tuple
    build: Callable
    amplitude: float = 0.5


def _two_variable_builder(sizes):
    shape = GridShape(3, tuple(sizes))
    X, Y = shape.coordinate(4), shape.coordinate(5)
    basis = [np.cos(X), np.sin(X), np.cos(Y), np.sin(Y), np.cos(X + Y), np.sin(X - Y)]

    def build(p):
        p = np.asarray(p, dtype=float)
        xi = 1.0 + sum(c * b for c, b in zip(p[:6], basis))
        eta = 1.0 + sum(c * b for c, b in zip(p[6:], basis))
        xi = np.broadcast_to(xi, shape.sizes)
        eta = np.broadcast_to(eta, shape.sizes)
        if np.min(xi) <= 0.05 or np.min(eta) <= 0.05:
            return None
        one = GridFunction.constant(GridShape.scalar(3), 1.0)
        return HermitianMetric.from_matrix(3, {(1, 1): GridFunction(shape, xi.copy()),
                                               (2, 2): GridFunction(shape, eta.copy()),
                                               (3, 3): one})
    return build


def _x3_builder(sizes):
    shape = GridShape(3, tuple(sizes))
    X = shape.coordinate(4)
    basis = [np.cos(X), np.sin(X), np.cos(2 * X), np.sin(2 * X)]

    def build(p):
        p = np.asarray(p, dtype=float)
        xi = np.broadcast_to(1.0 + sum(c * b for c, b in zip(p[:4], basis)), shape.sizes)
        eta = np.broadcast_to(1.0 + sum(c * b for c, b in zip(p[4:], basis)), shape.sizes)
        if np.min(xi) <= 0.05 or np.min(eta) <= 0.05:
            return None
        one = GridFunction.constant(GridShape.scalar(3), 1.0)
        return HermitianMetric.from_matrix(3, {(1, 1): GridFunction(shape, xi.copy()),
                                               (2, 2): GridFunction(shape, eta.copy()),
                                               (3, 3): one})
    return build


def family(name: str, n3: int = 32) -> FamilySpec:
    if name == "diagonal-x3":
        sizes = (1, 1, 1, 1, n3, 1)
        return FamilySpec(name, 8, sizes, _x3_builder(sizes))
    if name == "diagonal-x3y3":
        sizes = (1, 1, 1, 1, n3 // 2, n3 // 2)
        return FamilySpec(name, 12, sizes, _two_variable_builder(sizes))
    raise ArgumentError(f"unknown family {name!r}")


FAMILIES = ("diagonal-x3", "diagonal-x3y3")


@dataclass
class SearchResult:
    success: bool
    best_gamma: float | None
    best_params: list | None
    family: str
    seed: int
    tol: float
    log: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"success": self.success, "best_gamma": self.best_gamma,
                "best_params": self.best_params, "family": self.family, "seed": self.seed,
                "tol": self.tol, "evaluations": len(self.log), "log": self.log}


def negative_gamma1_search(budget: int = 24, family_spec: str | FamilySpec = "diagonal-x3",
                           seed: int = 0, tol: float = 1e-8, opts: SolveOptions | None = None) -> SearchResult:
    """Sample a metric family and keep the most negative ``gamma_1``.

    Samples whose integral ``(i/2) int ddbar(omega) ^ omega`` is nonnegative are
    still solved (the integral is only a screen); it is logged as ``screen``.
    Failure to find ``gamma_1 < -tol`` is a reported outcome.
    """
    spec = family(family_spec) if isinstance(family_spec, str) else family_spec
    rng = np.random.default_rng(seed)
    opts = opts or SolveOptions(newton_tol=1e-9)
    best, best_p = None, None
    entries = []
    attempts = 0
    while len(entries) < budget and attempts < 20 * budget:
        attempts += 1
        p = rng.uniform(-spec.amplitude, spec.amplitude, size=spec.n_params)
        w = spec.build(p)
        if w is None:
            continue
        screen = integral_criterion(w.form, 1)
        try:
            g = gamma_k(w, 1, opts).gamma
        except GauduchonError as exc:
            entries.append({"params": [float(x) for x in p], "screen": screen, "error": str(exc)})
            continue
        entries.append({"params": [float(x) for x in p], "screen": screen, "gamma": g})
        if best is None or g < best:
            best, best_p = g, [float(x) for x in p]
    success = best is not None and best < -tol
    log.info("negative gamma_1 search (%s, seed %d): best %.3e over %d samples",
             spec.name, seed, best if best is not None else float("nan"), len(entries))
    return SearchResult(success, best, best_p, spec.name, seed, tol, entries)


# -- registry -------------------------------------------------------------------------------
@dataclass(frozen=True)
class ExampleSpec:
    name: str
    kind: str              # "grid", "coframe" or "integral"
    k: int
    expected_sign: str     # "+", "-" or "0"
    provenance: str
    builder: Callable
    parameters: dict = field(default_factory=dict)


EXAMPLES = {
    "flat": ExampleSpec("flat", "grid", 1, "0", "Kahler metric", lambda: flat_metric(3)),
    "torus": ExampleSpec("torus", "grid", 1, "+", "positive torus construction",
                         lambda: torus_positive_gamma1(1.0, 256), {"C": 1.0, "points": 256}),
    "torus-gauduchon": ExampleSpec("torus-gauduchon", "grid", 2, "0", "k = n-1",
                                   lambda: torus_positive_gamma1(1.0, 256), {"C": 1.0, "points": 256}),
    "bump": ExampleSpec("bump", "integral", 1, "+", "bump semi-metric integral",
                        lambda: bump_semimetric((16,) * 6), {"points": 16, "scale": BUMP_SCALE}),
    "iwasawa": ExampleSpec("iwasawa", "coframe", 1, "+", "Iwasawa manifold", iwasawa),
    "s5s1": ExampleSpec("s5s1", "coframe", 1, "-", "S^5 x S^1", s5s1),
    "abelian": ExampleSpec("abelian", "coframe", 1, "0", "flat coframe", abelian_torus),
}
