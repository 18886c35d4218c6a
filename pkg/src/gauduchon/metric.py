"""Hermitian metrics on the torus and the operators they induce.

A metric is stored as its (1,1)-form ``omega = (i/2) sum g_ij dz_i ^ dzbar_j``
together with the matrix field ``g_ij``, the transposed inverse ``g^{ij}``
and cached powers ``omega^k``.  Real 1-forms are passed around as
:class:`OneFormPair` (their ``dz`` and ``dzbar`` components).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .forms import (HALF_I, Form, ddbar, del_, delbar, dz, hermitian_form, integrate_top,
                    power, ratio_to_volume, scalar_form, top_coefficient, wedge)
from .grid import GridFunction, GridShape, broadcast_shapes

EIGEN_FLOOR = 1e-10
HERMITIAN_TOL = 1e-12
REAL_TOL = 1e-11


def _matrix_entries(form: Form) -> dict:
    """``{(i, j): g_ij}`` read off a (1,1)-form (so ``coeff = (i/2) g``)."""
    if form.bidegree != (1, 1):
        raise ArgumentError(f"a metric is a (1,1)-form, got bidegree {form.bidegree}")
    return {(I[0], J[0]): c * (-2j) for (I, J), c in form.coeffs.items()}


def _hermitian_residual(entries: dict, n: int) -> float:
    worst = 0.0
    for (i, j), g in entries.items():
        other = entries.get((j, i))
        if other is None:
            worst = max(worst, g.sup_norm())
        else:
            worst = max(worst, (g - other.conj()).sup_norm())
    return worst


def _is_diagonal(entries: dict) -> bool:
    return all(i == j for i, j in entries)


def _eigen_floor(entries: dict, n: int) -> float:
    if _is_diagonal(entries):
        if len(entries) < n:
            return 0.0
        return min(g.min() for g in entries.values())
    G = _stack_matrix(entries, n)
    return float(np.min(np.linalg.eigvalsh(G)))


def _stack_matrix(entries: dict, n: int) -> np.ndarray:
    shape = broadcast_shapes([g.shape for g in entries.values()])
    G = np.zeros(shape.sizes + (n, n), dtype=complex)
    for (i, j), g in entries.items():
        G[..., i - 1, j - 1] = np.broadcast_to(g.values, shape.sizes)
    return G


@dataclass(frozen=True)
class OneFormPair:
    """A 1-form ``sum A_i dz_i + A_ibar dzbar_i``; ``None`` entries are zero."""

    n: int
    dz: tuple
    dzbar: tuple

    def __post_init__(self):
        if len(self.dz) != self.n or len(self.dzbar) != self.n:
            raise ArgumentError(f"a 1-form on n={self.n} needs {self.n} components per type")

    @classmethod
    def zero(cls, n: int) -> "OneFormPair":
        return cls(n, (None,) * n, (None,) * n)

    @classmethod
    def from_real(cls, n: int, dx: dict, dy: dict) -> "OneFormPair":
        """From real components ``sum a_j dx_j + b_j dy_j`` (1-based dicts)."""
        hol, anti = [], []
        for j in range(1, n + 1):
            a, b = dx.get(j), dy.get(j)
            if a is None and b is None:
                hol.append(None)
                anti.append(None)
                continue
            a = a if a is not None else 0.0
            b = b if b is not None else 0.0
            # dx = (dz + dzbar)/2, dy = (dz - dzbar)/(2i)
            hol.append(0.5 * a - 0.5j * b)
            anti.append(0.5 * a + 0.5j * b)
        return cls(n, tuple(_as_gf(c, n) for c in hol), tuple(_as_gf(c, n) for c in anti))

    @classmethod
    def from_form(cls, form10: Form, form01: Form) -> "OneFormPair":
        n = form10.n
        return cls(n, tuple(form10.coeffs.get(((j,), ())) for j in range(1, n + 1)),
                   tuple(form01.coeffs.get(((), (j,))) for j in range(1, n + 1)))

    def is_zero(self) -> bool:
        return all(c is None for c in self.dz + self.dzbar)

    def __add__(self, other: "OneFormPair") -> "OneFormPair":
        def add(a, b):
            if a is None:
                return b
            if b is None:
                return a
            return a + b
        return OneFormPair(self.n, tuple(add(a, b) for a, b in zip(self.dz, other.dz)),
                           tuple(add(a, b) for a, b in zip(self.dzbar, other.dzbar)))

    def __mul__(self, factor) -> "OneFormPair":
        def mul(a):
            return None if a is None else a * factor
        return OneFormPair(self.n, tuple(mul(a) for a in self.dz), tuple(mul(a) for a in self.dzbar))

    __rmul__ = __mul__

    def reality_residual(self) -> float:
        """``sup |A_ibar - conj(A_i)|``; zero for real 1-forms."""
        worst = 0.0
        for a, b in zip(self.dz, self.dzbar):
            if a is None and b is None:
                continue
            if a is None or b is None:
                worst = max(worst, (a if b is None else b).sup_norm())
            else:
                worst = max(worst, (b - a.conj()).sup_norm())
        return worst

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "dz": {str(j + 1): c.to_json() for j, c in enumerate(self.dz) if c is not None},
            "dzbar": {str(j + 1): c.to_json() for j, c in enumerate(self.dzbar) if c is not None},
        }

    @classmethod
    def from_json(cls, data: dict) -> "OneFormPair":
        n = int(data["n"])
        hol = [None] * n
        anti = [None] * n
        for key, target in (("dz", hol), ("dzbar", anti)):
            for j, c in data.get(key, {}).items():
                target[int(j) - 1] = GridFunction.from_json(c)
        return cls(n, tuple(hol), tuple(anti))


def _as_gf(c, n):
    if c is None or isinstance(c, GridFunction):
        return c
    return GridFunction.constant(GridShape.scalar(n), c)


def differential(h: GridFunction) -> OneFormPair:
    """``dh`` split as ``(dh/dz_j, dh/dzbar_j)``; uses conjugation when ``h`` is real."""
    n = h.n
    hol = tuple(h.holomorphic_derivative(j) for j in range(1, n + 1))
    if h.is_complex:
        anti = tuple(h.holomorphic_derivative(j, True) for j in range(1, n + 1))
    else:
        anti = tuple(c.conj() for c in hol)
    return OneFormPair(n, hol, anti)


class HermitianMetric:
    """A positive (1,1)-form with cached inverse matrix, volume and powers."""

    def __init__(self, form: Form, floor: float = EIGEN_FLOOR):
        entries = _matrix_entries(form)
        n = form.n
        res = _hermitian_residual(entries, n)
        scale = max(1.0, max((g.sup_norm() for g in entries.values()), default=0.0))
        if res > HERMITIAN_TOL * scale:
            raise ArgumentError(f"metric matrix is not hermitian (residual {res:.3e})")
        self.n = n
        self.form = form
        self.shape = form.shape
        self.diagonal = _is_diagonal(entries)
        if self.diagonal:
            self.matrix = {k: g.real for k, g in entries.items()}
            self.eigen_floor = _eigen_floor(self.matrix, n)
            if self.eigen_floor <= floor:
                raise ArgumentError(f"metric is not positive definite (eigen floor {self.eigen_floor:.3e})")
            self.inverse = {k: 1.0 / g for k, g in self.matrix.items()}
        else:
            self.matrix = entries
            G = _stack_matrix(entries, n)
            self.eigen_floor = float(np.min(np.linalg.eigvalsh(G)))
            if self.eigen_floor <= floor:
                raise ArgumentError(f"metric is not positive definite (eigen floor {self.eigen_floor:.3e})")
            Ginv = np.linalg.inv(G)
            shape = broadcast_shapes([g.shape for g in entries.values()])
            inv = {}
            for i in range(1, n + 1):
                for j in range(1, n + 1):
                    # g^{i jbar} is the transposed inverse
                    vals = Ginv[..., j - 1, i - 1]
                    if np.max(np.abs(vals)) > 0.0:
                        inv[(i, j)] = GridFunction(shape, np.ascontiguousarray(vals))
            self.inverse = inv
        self._powers = {1: form}
        self.volume = self.power(n)

    # -- construction -------------------------------------------------------
    @classmethod
    def from_matrix(cls, n: int, entries: dict, floor: float = EIGEN_FLOOR) -> "HermitianMetric":
        """From ``{(i, j): g_ij}``; a missing ``(j, i)`` defaults to ``conj(g_ij)``."""
        full = {}
        for (i, j), g in entries.items():
            full[(i, j)] = _as_gf(g, n)
        for (i, j), g in list(full.items()):
            if (j, i) not in full:
                full[(j, i)] = g.conj()
        return cls(hermitian_form(full, n), floor)

    @classmethod
    def flat(cls, n: int, shape: GridShape | None = None) -> "HermitianMetric":
        one = GridFunction.constant(shape or GridShape.scalar(n), 1.0)
        return cls.from_matrix(n, {(j, j): one for j in range(1, n + 1)})

    def conformal(self, rho) -> "HermitianMetric":
        """The metric ``e^rho omega``."""
        factor = rho.exp() if isinstance(rho, GridFunction) else math.exp(rho)
        return HermitianMetric(self.form * factor)

    def power(self, k: int) -> Form:
        if k not in self._powers:
            if k == 0:
                self._powers[0] = power(self.form, 0)
            else:
                self._powers[k] = wedge(self.power(k - 1), self.form)
        return self._powers[k]

    def volume_density(self) -> GridFunction:
        """Positive density of ``omega^n`` against ``dx1 dy1 ... dxn dyn``."""
        from .forms import volume_factor
        return (top_coefficient(self.volume) * volume_factor(self.n)).real

    def average(self, u: GridFunction):
        """``int u omega^n / int omega^n``."""
        rho = self.volume_density()
        return (u * rho).mean() / rho.mean()

    def __repr__(self):
        return f"HermitianMetric(n={self.n}, sizes={self.shape.sizes}, diagonal={self.diagonal})"


def combine(t: float, w1: HermitianMetric, w2: HermitianMetric) -> HermitianMetric:
    """``t w1 + (1 - t) w2``."""
    return HermitianMetric(w1.form * t + w2.form * (1.0 - t))


def _mul(a, b, dealias):
    if dealias:
        return a.multiply(b, dealias=True)
    return a * b


def _sum(terms):
    out = None
    for t in terms:
        out = t if out is None else out + t
    return out


# -- second-order operators ---------------------------------------------------
def laplacian(w: HermitianMetric, h: GridFunction, check: bool = False,
              dealias: bool = False) -> GridFunction:
    """``sum g^{ij} h_{i jbar}``; with ``check`` also compares with the form expression."""
    if h.n != w.n:
        raise ArgumentError("metric and function live in different dimensions")
    w.shape.broadcast(h.shape)
    out = _sum(_mul(ginv, h.mixed_derivative(i, j), dealias) for (i, j), ginv in w.inverse.items())
    if not h.is_complex:
        out = out.real
    if check:
        other = laplacian_form(w, h)
        gap = (out - other).sup_norm()
        if gap > 1e-9 * max(1.0, other.sup_norm()):
            raise AssertionError(f"laplacian paths disagree by {gap:.3e}")
    return out


def laplacian_form(w: HermitianMetric, h: GridFunction) -> GridFunction:
    """``n omega^{n-1} ^ (i/2) ddbar h / omega^n``."""
    n = w.n
    top = wedge(ddbar(scalar_form(h)), w.power(n - 1))
    out = ratio_to_volume(top, w.volume) * (n * HALF_I)
    return out if h.is_complex else out.real


def pair(w: HermitianMetric, A: OneFormPair, B: OneFormPair, dealias: bool = False) -> GridFunction:
    """``<A, B> = 1/2 sum g^{ij} (A_i B_jbar + A_jbar B_i)``."""
    terms = []
    for (i, j), ginv in w.inverse.items():
        for x, y in ((A.dz[i - 1], B.dzbar[j - 1]), (A.dzbar[j - 1], B.dz[i - 1])):
            if x is not None and y is not None:
                terms.append(_mul(ginv, _mul(x, y, dealias), dealias))
    total = _sum(terms)
    if total is None:
        return GridFunction.constant(w.shape, 0.0)
    return (total * 0.5).real


def grad_norm_sq(w: HermitianMetric, h: GridFunction, dealias: bool = False) -> GridFunction:
    """``|grad h|^2 = sum g^{ij} h_i h_jbar``."""
    dh = differential(h)
    return pair(w, dh, dh, dealias)


# -- torsion data ---------------------------------------------------------------
def _check_k(w, k):
    if not 1 <= k <= w.n - 1:
        raise ArgumentError(f"k must lie in 1..{w.n - 1}, got {k}")


def _real(u: GridFunction) -> GridFunction:
    return u.to_real(REAL_TOL * max(1.0, u.sup_norm()))


def phi_k(w: HermitianMetric, k: int) -> GridFunction:
    """``n (i/2) ddbar(omega^k) ^ omega^{n-k-1} / omega^n``."""
    _check_k(w, k)
    top = wedge(ddbar(w.power(k)), w.power(w.n - k - 1))
    if top.is_zero():
        return GridFunction.constant(w.shape, 0.0)
    return _real(ratio_to_volume(top, w.volume) * (w.n * HALF_I))


def b1_form(w: HermitianMetric, k: int) -> OneFormPair:
    """The first-order torsion term of the conformal operator.

    Read off by inserting ``dz_j`` (resp. ``dzbar_j``) for ``del v`` (resp.
    ``delbar v``) in ``n (i/2)(del v ^ dbar omega^k + del omega^k ^ dbar v)
    ^ omega^{n-k-1} / omega^n`` and raising the index with ``g``.
    """
    _check_k(w, k)
    n = w.n
    wk = w.power(k)
    rest = w.power(n - k - 1)
    dwk, dbwk = del_(wk), delbar(wk)
    beta, betabar = [], []
    for j in range(1, n + 1):
        a = wedge(wedge(dz(n, j), dbwk), rest)
        b = wedge(wedge(dwk, dz(n, j, conjugate=True)), rest)
        beta.append(None if a.is_zero() else ratio_to_volume(a, w.volume) * (n * HALF_I))
        betabar.append(None if b.is_zero() else ratio_to_volume(b, w.volume) * (n * HALF_I))
    hol, anti = [], []
    for i in range(1, n + 1):
        # B_i = 2 sum_j g_{i jbar} betabar_j ; B_ibar = 2 sum_j g_{j ibar} beta_j
        hol.append(_sum(2.0 * g * betabar[j - 1] for (ii, j), g in w.matrix.items()
                        if ii == i and betabar[j - 1] is not None))
        anti.append(_sum(2.0 * g * beta[j - 1] for (j, ii), g in w.matrix.items()
                         if ii == i and beta[j - 1] is not None))
    return OneFormPair(n, tuple(hol), tuple(anti))


def conformal_numerator(w: HermitianMetric, k: int, u: GridFunction) -> GridFunction:
    """``(i/2) ddbar(u omega^k) ^ omega^{n-k-1} / omega^n``; linear in ``u``."""
    top = wedge(ddbar(w.power(k) * u), w.power(w.n - k - 1))
    if top.is_zero():
        return GridFunction.constant(w.shape, 0.0)
    return ratio_to_volume(top, w.volume) * HALF_I


def nonlinear_F(w: HermitianMetric, k: int, v: GridFunction) -> GridFunction:
    """``n e^{-v} (i/2) ddbar(e^v omega^k) ^ omega^{n-k-1} / omega^n``."""
    _check_k(w, k)
    if v.is_complex:
        v = v.to_real(REAL_TOL * max(1.0, v.sup_norm()))
    u = v.exp()
    return _real(conformal_numerator(w, k, u) * w.n / u)


# -- classification -------------------------------------------------------------
@dataclass
class ClassificationReport:
    tol: float
    kahler_residual: float
    balanced_residual: float
    gauduchon_residual: float
    pluriclosed_residual: float
    k_gauduchon_residuals: dict = field(default_factory=dict)

    @property
    def is_kahler(self) -> bool:
        return self.kahler_residual <= self.tol

    @property
    def is_balanced(self) -> bool:
        return self.balanced_residual <= self.tol

    @property
    def is_gauduchon(self) -> bool:
        return self.gauduchon_residual <= self.tol

    @property
    def is_pluriclosed(self) -> bool:
        return self.pluriclosed_residual <= self.tol

    def is_k_gauduchon(self, k: int) -> bool:
        return self.k_gauduchon_residuals[k] <= self.tol

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "is_kahler": self.is_kahler,
            "is_balanced": self.is_balanced,
            "is_gauduchon": self.is_gauduchon,
            "is_pluriclosed": self.is_pluriclosed,
            "residuals": {
                "kahler": self.kahler_residual,
                "balanced": self.balanced_residual,
                "gauduchon": self.gauduchon_residual,
                "pluriclosed": self.pluriclosed_residual,
            },
            "k_gauduchon": {str(k): {"residual": r, "holds": r <= self.tol}
                            for k, r in sorted(self.k_gauduchon_residuals.items())},
        }


def _d_residual(form: Form) -> float:
    return max(del_(form).sup_norm(), delbar(form).sup_norm())


def classify(w: HermitianMetric, tol: float) -> ClassificationReport:
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    n = w.n
    wn1 = w.power(n - 1)
    kres = {}
    for k in range(1, n):
        kres[k] = wedge(ddbar(w.power(k)), w.power(n - k - 1)).sup_norm()
    return ClassificationReport(
        tol=tol,
        kahler_residual=_d_residual(w.form),
        balanced_residual=_d_residual(wn1),
        gauduchon_residual=ddbar(wn1).sup_norm(),
        pluriclosed_residual=ddbar(w.form).sup_norm(),
        k_gauduchon_residuals=kres,
    )


# -- integral criteria ----------------------------------------------------------
def integral_criterion(w_ring: Form, k: int) -> float:
    """``(i/2) int ddbar(w^k) ^ w^{n-k-1}`` for a semi-positive (1,1)-form."""
    n = w_ring.n
    if not 1 <= k <= n - 1:
        raise ArgumentError(f"k must lie in 1..{n - 1}, got {k}")
    entries = _matrix_entries(w_ring)
    if _hermitian_residual(entries, n) > HERMITIAN_TOL * max(1.0, w_ring.sup_norm()):
        raise ArgumentError("semi-metric is not hermitian")
    if entries:
        if _is_diagonal(entries):
            floor = min(g.real.min() for g in entries.values())
        else:
            floor = _eigen_floor(entries, n)
        if floor < -1e-12:
            raise ArgumentError(f"semi-metric is indefinite (eigen floor {floor:.3e})")
    wk = power(w_ring, k)
    top = wedge(ddbar(wk), power(w_ring, n - k - 1))
    del wk
    return float((HALF_I * integrate_top(top)).real) if not top.is_zero() else 0.0


def gauduchon_criterion(w: HermitianMetric, k: int, opts=None) -> float:
    """``integral_criterion`` evaluated on the Gauduchon metric conformal to ``w``.

    A positive value implies ``gamma_k(w) > 0`` for ``1 <= k <= n-2``.
    """
    from .solver import gamma_k

    n = w.n
    rep = gamma_k(w, n - 1, opts)
    tilde = w.conformal(rep.v * (1.0 / (n - 1)))
    return integral_criterion(tilde.form, k)
