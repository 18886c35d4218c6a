"""Complex differential forms on the torus with grid-function coefficients.

A ``Form`` of bidegree (p, q) stores coefficients against monomials
``dz_I ^ dzbar_J`` with ``I`` (length p) and ``J`` (length q) strictly
increasing, 1-based, and every ``dz`` written before every ``dzbar``.
Reordering signs all go through :func:`sort_sign`; monomials are encoded as
integer sequences in which ``dz_j`` is ``j`` and ``dzbar_j`` is ``n + j``,
so the canonical order is simply ascending order.

Constant factors such as ``i/2`` live in the coefficients.
"""
from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .errors import ArgumentError, SingularVolumeError
from .grid import GridFunction, GridShape, broadcast_shapes, dim_of

PRUNE_TOL = 1e-15
VOLUME_FLOOR = 1e-14
HALF_I = 0.5j


def sort_sign(seq: Iterable[int]):
    """Sort ``seq``; return ``(sorted tuple, parity sign)`` or ``(None, 0)`` on repeats."""
    items = list(seq)
    sign = 1
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
        if j > 0 and items[j - 1] == items[j]:
            return None, 0
    return tuple(items), sign


def _encode(n, key):
    I, J = key
    return tuple(I) + tuple(n + j for j in J)


def _decode(n, seq):
    return (tuple(s for s in seq if s <= n), tuple(s - n for s in seq if s > n))


class _Accumulator:
    """Sums signed coefficient arrays per monomial, in place where possible."""

    def __init__(self, n):
        self.n = n
        self.data = {}

    def add(self, key, shape, values, sign=1):
        cur = self.data.get(key)
        if sign < 0:
            values = -values
            owned = True
        else:
            owned = False
        if cur is None:
            self.data[key] = [shape, values, owned]
            return
        cshape, cvals, cowned = cur
        tshape = cshape.broadcast(shape)
        if (cowned and cvals.shape == np.broadcast_shapes(cvals.shape, values.shape)
                and (cvals.dtype.kind == "c" or values.dtype.kind != "c")):
            np.add(cvals, values, out=cvals)
        else:
            cur[1] = cvals + values
            cur[2] = True
        cur[0] = tshape

    def form(self, p, q, scale):
        thresh = PRUNE_TOL * max(scale, 1e-300)
        coeffs = {}
        for key, (shape, vals, _) in self.data.items():
            if vals.size == 0 or float(np.max(np.abs(vals))) <= thresh:
                continue
            coeffs[key] = GridFunction(shape, vals)
        return Form(self.n, p, q, coeffs, check=False)


class Form:
    """A (p, q)-form: map from ``(I, J)`` index pairs to grid functions."""

    __slots__ = ("n", "p", "q", "coeffs")

    def __init__(self, n: int, p: int, q: int, coeffs: dict | None = None, check: bool = True):
        self.n, self.p, self.q = int(n), int(p), int(q)
        if self.p < 0 or self.q < 0:
            raise ArgumentError(f"negative bidegree ({p}, {q})")
        coeffs = dict(coeffs or {})
        if self.p > self.n or self.q > self.n:
            coeffs = {}
        if check:
            for (I, J), c in coeffs.items():
                I, J = tuple(I), tuple(J)
                if len(I) != self.p or len(J) != self.q:
                    raise ArgumentError(f"monomial {(I, J)} does not have bidegree ({p}, {q})")
                for idx in (I, J):
                    if any(not 1 <= i <= self.n for i in idx) or any(
                            a >= b for a, b in zip(idx, idx[1:])):
                        raise ArgumentError(f"index {idx} is not strictly increasing in 1..{n}")
                if not isinstance(c, GridFunction) or c.n != self.n:
                    raise ArgumentError(f"coefficient of {(I, J)} is not a grid function on n={n}")
            coeffs = {(tuple(I), tuple(J)): c for (I, J), c in coeffs.items()}
        self.coeffs = coeffs

    # -- basics -------------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.p + self.q

    @property
    def bidegree(self) -> tuple:
        return (self.p, self.q)

    @property
    def shape(self) -> GridShape:
        if not self.coeffs:
            return GridShape.scalar(self.n)
        return broadcast_shapes(c.shape for c in self.coeffs.values())

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, I, J) -> GridFunction:
        c = self.coeffs.get((tuple(I), tuple(J)))
        if c is None:
            return GridFunction.constant(GridShape.scalar(self.n), 0.0)
        return c

    def sup_norm(self) -> float:
        return max((c.sup_norm() for c in self.coeffs.values()), default=0.0)

    def __repr__(self):
        return f"Form(n={self.n}, bidegree=({self.p},{self.q}), terms={sorted(self.coeffs)})"

    # -- linear structure ---------------------------------------------------
    def _check_compatible(self, other):
        if not isinstance(other, Form):
            raise ArgumentError("expected a Form")
        if other.n != self.n:
            raise ArgumentError(f"forms live in different dimensions: {self.n} vs {other.n}")
        if other.bidegree != self.bidegree and not (self.is_zero() or other.is_zero()):
            raise ArgumentError(f"cannot add bidegrees {self.bidegree} and {other.bidegree}")

    def __add__(self, other):
        self._check_compatible(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        coeffs = dict(self.coeffs)
        for key, c in other.coeffs.items():
            coeffs[key] = coeffs[key] + c if key in coeffs else c
        return Form(self.n, self.p, self.q, coeffs, check=False)

    def __neg__(self):
        return Form(self.n, self.p, self.q, {k: -c for k, c in self.coeffs.items()}, check=False)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, factor):
        """Multiply by a number or a grid function (a (0,0)-form)."""
        if isinstance(factor, Form):
            return wedge(self, factor)
        if isinstance(factor, GridFunction):
            return Form(self.n, self.p, self.q,
                        {k: c * factor for k, c in self.coeffs.items()}, check=False)
        if factor == 0:
            return Form(self.n, self.p, self.q)
        return Form(self.n, self.p, self.q, {k: c * factor for k, c in self.coeffs.items()},
                    check=False)

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def conj(self) -> "Form":
        sign = (-1) ** (self.p * self.q)
        coeffs = {(J, I): c.conj() * sign if sign < 0 else c.conj()
                  for (I, J), c in self.coeffs.items()}
        return Form(self.n, self.q, self.p, coeffs, check=False)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "terms": [{"I": list(I), "J": list(J), "coeff": c.to_json()}
                      for (I, J), c in sorted(self.coeffs.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Form":
        try:
            coeffs = {(tuple(t["I"]), tuple(t["J"])): GridFunction.from_json(t["coeff"])
                      for t in data.get("terms", [])}
            return cls(data["n"], data["p"], data["q"], coeffs)
        except (KeyError, TypeError) as exc:
            raise ArgumentError(f"malformed form JSON: {exc}") from exc


# -- constructors ---------------------------------------------------------------
def scalar_form(u) -> Form:
    if not isinstance(u, GridFunction):
        raise ArgumentError("scalar_form expects a GridFunction")
    return Form(u.n, 0, 0, {((), ()): u}, check=False)


def unit(n: int) -> Form:
    return scalar_form(GridFunction.constant(GridShape.scalar(n), 1.0))


def dz(n: int, j: int, conjugate: bool = False) -> Form:
    """The constant 1-form ``dz_j`` (or ``dzbar_j``)."""
    one = GridFunction.constant(GridShape.scalar(n), 1.0)
    key = ((), (j,)) if conjugate else ((j,), ())
    return Form(n, 0 if conjugate else 1, 1 if conjugate else 0, {key: one})


def hermitian_form(entries: dict, n: int) -> Form:
    """``(i/2) sum g_ij dz_i ^ dzbar_j`` from a dict ``{(i, j): GridFunction}``."""
    return Form(n, 1, 1, {((i,), (j,)): HALF_I * g for (i, j), g in entries.items()})


# -- algebra --------------------------------------------------------------------
def wedge(a: Form, b: Form) -> Form:
    if a.n != b.n:
        raise ArgumentError(f"forms live in different dimensions: {a.n} vs {b.n}")
    n = a.n
    p, q = a.p + b.p, a.q + b.q
    if p > n or q > n or a.is_zero() or b.is_zero():
        return Form(n, p, q)
    acc = _Accumulator(n)
    for ka, ca in a.coeffs.items():
        sa = _encode(n, ka)
        for kb, cb in b.coeffs.items():
            seq, sign = sort_sign(sa + _encode(n, kb))
            if sign == 0:
                continue
            shape = ca.shape.broadcast(cb.shape)
            acc.add(_decode(n, seq), shape, ca.values * cb.values, sign)
    return acc.form(p, q, a.sup_norm() * b.sup_norm())


def power(w: Form, k: int) -> Form:
    """``w^k`` for a (1,1)-form; ``k = 0`` gives the constant 1."""
    if w.bidegree != (1, 1):
        raise ArgumentError(f"power expects a (1,1)-form, got {w.bidegree}")
    if k < 0:
        raise ArgumentError("power must be >= 0")
    if k == 1:
        return w
    out = unit(w.n)
    for _ in range(k):
        out = wedge(out, w)
    return out


def _needs(c: GridFunction, j: int) -> bool:
    s = c.shape.sizes
    return s[dim_of(j)] > 1 or s[dim_of(j, True)] > 1


def _derive_into(n, key, c, conjugate):
    I, J = key
    used = J if conjugate else I
    seq0 = _encode(n, key)
    for j in range(1, n + 1):
        if j in used or not _needs(c, j):
            continue
        slot = n + j if conjugate else j
        seq, sign = sort_sign((slot,) + seq0)
        dc = c.holomorphic_derivative(j, conjugate)
        yield _decode(n, seq), sign, dc


def _derivative(a: Form, conjugate: bool) -> Form:
    n = a.n
    p, q = (a.p, a.q + 1) if conjugate else (a.p + 1, a.q)
    if p > n or q > n:
        return Form(n, p, q)
    acc = _Accumulator(n)
    for key, c in a.coeffs.items():
        for nkey, sign, dc in _derive_into(n, key, c, conjugate):
            acc.add(nkey, dc.shape, dc.values, sign)
    return acc.form(p, q, a.sup_norm())


def del_(a: Form) -> Form:
    """Holomorphic exterior derivative (bidegree (p+1, q))."""
    return _derivative(a, False)


def delbar(a: Form) -> Form:
    """Antiholomorphic exterior derivative (bidegree (p, q+1))."""
    return _derivative(a, True)


def d(a: Form) -> tuple:
    """Total derivative ``del + delbar``, returned as its two pieces.

    Forms here carry a single bidegree, so ``d a`` is the pair
    ``(del a, delbar a)``; it vanishes iff both pieces do.
    """
    return del_(a), delbar(a)


def ddbar(a: Form) -> Form:
    """``del(delbar(a))``, streamed one coefficient at a time to bound memory.

    Each ``d^2/dz_i dzbar_j`` is applied in one pass, so diagonal terms use
    exact second-derivative symbols.
    """
    n = a.n
    p, q = a.p + 1, a.q + 1
    if p > n or q > n:
        return Form(n, p, q)
    acc = _Accumulator(n)
    for key, c in a.coeffs.items():
        I, J = key
        seq0 = _encode(n, key)
        for j in range(1, n + 1):
            if j in J or not _needs(c, j):
                continue
            for i in range(1, n + 1):
                if i in I or not _needs(c, i):
                    continue
                seq, sign = sort_sign((i, n + j) + seq0)
                if seq is None:
                    continue
                dc = c.mixed_derivative(i, j)
                acc.add(_decode(n, seq), dc.shape, dc.values, sign)
                del dc
    return acc.form(p, q, a.sup_norm())


def top_key(n: int):
    idx = tuple(range(1, n + 1))
    return (idx, idx)


def top_coefficient(a: Form) -> GridFunction:
    if a.bidegree != (a.n, a.n):
        raise ArgumentError(f"expected an (n,n)-form, got bidegree {a.bidegree}")
    return a.coeff(*top_key(a.n))


def ratio_to_volume(a: Form, vol: Form) -> GridFunction:
    """Pointwise quotient of two top-degree forms."""
    num = top_coefficient(a)
    den = top_coefficient(vol)
    mags = np.abs(den.values)
    if mags.size == 0 or float(np.min(mags)) <= VOLUME_FLOOR:
        flat = int(np.argmin(mags)) if mags.size else 0
        index = np.unravel_index(flat, mags.shape) if mags.size else ()
        raise SingularVolumeError(f"volume form degenerate at grid point {tuple(int(i) for i in index)}",
                                  index=index)
    return num / den


def volume_factor(n: int) -> complex:
    """Value of ``dz_1..dz_n ^ dzbar_1..dzbar_n`` against ``dx1 dy1 ... dxn dyn``."""
    return (-1) ** (n * (n - 1) // 2) * (-2j) ** n


def integrate_top(a: Form):
    """Integral over the torus of a top-degree form (oriented by ``dx1 dy1 ...``)."""
    if a.is_zero():
        return 0.0
    return top_coefficient(a).integrate() * volume_factor(a.n)


def conformal_integral_identity(w: Form, k: int, v: GridFunction):
    """Both sides of the integration-by-parts identity for ``exp(-v) ddbar(exp(v) w^k)``.

    Returns ``(lhs, rhs)`` with::

        lhs = int e^{-v} (i/2) ddbar(e^v w^k) ^ w^{n-k-1}
        rhs = (i/2) int [ddbar(w^k) ^ w^{n-k-1} + dv ^ dbar v ^ w^{n-1}]
              + (i/2) (1 - 2k/(n-1)) int v ddbar(w^{n-1})
    """
    n = w.n
    if n < 2 or not 1 <= k <= n - 1:
        raise ArgumentError(f"need n >= 2 and 1 <= k <= n-1 (n={n}, k={k})")
    wk = power(w, k)
    rest = power(w, n - k - 1)
    ev = v.exp()
    lhs = integrate_top(wedge(ddbar(wk * ev), rest) * (HALF_I * (-v).exp()))
    dv = del_(scalar_form(v))
    dbv = delbar(scalar_form(v))
    wn1 = power(w, n - 1)
    first = integrate_top(wedge(ddbar(wk), rest)) + integrate_top(wedge(wedge(dv, dbv), wn1))
    last = integrate_top(ddbar(wn1) * v)
    rhs = HALF_I * first + HALF_I * (1.0 - 2.0 * k / (n - 1)) * last
    return lhs, rhs
