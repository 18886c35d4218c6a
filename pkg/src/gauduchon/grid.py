"""Periodic scalar fields on the real torus T^{2n} = (R / 2piZ)^{2n}.

Real coordinates are ordered ``(x1, y1, x2, y2, ..., xn, yn)`` with
``z_j = x_j + i y_j``.  Grid nodes along a dimension of size ``N`` sit at
``2*pi*m/N``.  A size of 1 means the field is constant along that
dimension; such fields broadcast against finer ones, so a function of
``x3`` alone is stored as a 1-D array however large the ambient grid is.

Differentiation is spectral (FFT) and integration is the uniform mean,
which is exact for trigonometric polynomials below the Nyquist limit.

``GridFunction.values`` may carry extra *leading* axes.  They act as a
batch dimension (the solver uses this to assemble dense Jacobians) and
every operation here is written against the trailing ``2n`` axes.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.signal import resample as fourier_resample

from .errors import ArgumentError

TWO_PI = 2.0 * math.pi


def fft_workers() -> int:
    """Thread count for FFTs, capped by ``GAUDUCHON_THREADS`` when set."""
    env = os.environ.get("GAUDUCHON_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def wavenumbers(size: int) -> np.ndarray:
    """Integer wavenumbers for first derivatives; the Nyquist mode is dropped."""
    k = np.fft.fftfreq(size, 1.0 / size)
    if size % 2 == 0:
        k[size // 2] = 0.0
    return k


@dataclass(frozen=True)
class GridShape:
    """Complex dimension ``n`` and per-dimension sample counts (2n of them)."""

    n: int
    sizes: tuple

    def __post_init__(self):
        if int(self.n) < 1:
            raise ArgumentError(f"complex dimension must be >= 1, got {self.n}")
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) != 2 * int(self.n):
            raise ArgumentError(
                f"expected {2 * int(self.n)} grid sizes for n={self.n}, got {len(sizes)}")
        if any(s < 1 for s in sizes):
            raise ArgumentError(f"grid sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def scalar(cls, n: int) -> "GridShape":
        """The all-ones shape of a translation-invariant (constant) field."""
        return cls(n, (1,) * (2 * n))

    @classmethod
    def active(cls, n: int, points: dict) -> "GridShape":
        """Shape with ``points[dim]`` samples on the listed dimensions, 1 elsewhere."""
        sizes = [1] * (2 * n)
        for dim, size in points.items():
            sizes[dim] = size
        return cls(n, tuple(sizes))

    @property
    def ndim(self) -> int:
        return 2 * self.n

    @property
    def npoints(self) -> int:
        return math.prod(self.sizes)

    @property
    def active_dims(self) -> tuple:
        return tuple(d for d, s in enumerate(self.sizes) if s > 1)

    def check_dim(self, dim: int) -> int:
        if not 0 <= dim < self.ndim:
            raise ArgumentError(f"dimension index {dim} out of range 0..{self.ndim - 1}")
        return dim

    def check_complex_index(self, j: int) -> int:
        if not 1 <= j <= self.n:
            raise ArgumentError(f"complex index {j} out of range 1..{self.n}")
        return j

    def broadcast(self, other: "GridShape") -> "GridShape":
        if self == other:
            return self
        if self.n != other.n:
            raise ArgumentError(f"complex dimensions differ: {self.n} vs {other.n}")
        sizes = []
        for a, b in zip(self.sizes, other.sizes):
            if a != b and a != 1 and b != 1:
                raise ArgumentError(f"incompatible grid shapes {self.sizes} and {other.sizes}")
            sizes.append(max(a, b))
        return GridShape(self.n, tuple(sizes))

    def coordinate(self, dim: int) -> np.ndarray:
        """Node coordinates along ``dim``, shaped to broadcast over the grid."""
        self.check_dim(dim)
        size = self.sizes[dim]
        shape = [1] * self.ndim
        shape[dim] = size
        return (TWO_PI * np.arange(size) / size).reshape(shape)

    def coordinates(self) -> list:
        return [self.coordinate(d) for d in range(self.ndim)]


def broadcast_shapes(shapes: Iterable[GridShape]) -> GridShape:
    shapes = list(shapes)
    out = shapes[0]
    for s in shapes[1:]:
        out = out.broadcast(s)
    return out


def dim_of(j: int, imaginary: bool = False) -> int:
    """Real dimension index of ``x_j`` (or ``y_j``) for 1-based complex index ``j``."""
    return 2 * (j - 1) + (1 if imaginary else 0)


def _real_axis_op(values: np.ndarray, axis: int, size: int, order: int, workers: int):
    """Spectral ``d/dx`` (``order`` 1) or ``d^2/dx^2`` (``order`` 2) along one axis.

    Real and imaginary parts are transformed separately, so purely real or
    purely imaginary data stay that way.  The first derivative drops the
    Nyquist mode (its sign is ambiguous); the second keeps it as ``-(N/2)^2``.
    """
    k = np.arange(size // 2 + 1, dtype=float)
    if size % 2 == 0 and order == 1:
        k[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = k.size
    sym = (1j * k).reshape(shape) if order == 1 else (-(k ** 2)).reshape(shape)

    def one(part):
        spec = sfft.rfft(part, axis=axis, workers=workers)
        return sfft.irfft(sym * spec, n=size, axis=axis, workers=workers)

    if values.dtype.kind == "c":
        return one(values.real) + 1j * one(values.imag)
    return one(values)


class GridFunction:
    """Immutable samples of a (complex or real) function on a periodic grid."""

    __slots__ = ("shape", "values")

    def __init__(self, shape: GridShape, values):
        values = np.asarray(values)
        if values.dtype.kind not in "fc":
            values = values.astype(float)
        nd = shape.ndim
        if values.ndim == 1 and values.size == shape.npoints and nd > 1:
            values = values.reshape(shape.sizes)
        elif values.ndim == 0:
            values = np.broadcast_to(values, shape.sizes)
        if values.ndim < nd or tuple(values.shape[values.ndim - nd:]) != shape.sizes:
            raise ArgumentError(
                f"values of shape {values.shape} do not match grid sizes {shape.sizes}")
        view = values.view()
        view.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", view)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, shape: GridShape, value) -> "GridFunction":
        return cls(shape, np.full(shape.sizes, value))

    @classmethod
    def from_function(cls, shape: GridShape, fn: Callable) -> "GridFunction":
        """Sample ``fn(x1, y1, ..., xn, yn)`` at the grid nodes."""
        out = np.asarray(fn(*shape.coordinates()))
        return cls(shape, np.broadcast_to(out, shape.sizes).copy())

    def zeros_like(self) -> "GridFunction":
        return GridFunction(self.shape, np.zeros(self.values.shape, dtype=self.values.dtype))

    # -- basic properties ---------------------------------------------------
    @property
    def n(self) -> int:
        return self.shape.n

    @property
    def batch_shape(self) -> tuple:
        return self.values.shape[: self.values.ndim - self.shape.ndim]

    def _axis(self, dim: int) -> int:
        return self.values.ndim - self.shape.ndim + dim

    @property
    def is_complex(self) -> bool:
        return self.values.dtype.kind == "c"

    def sup_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.abs(self.values)))

    def max(self) -> float:
        return float(np.max(self.values.real))

    def min(self) -> float:
        return float(np.min(self.values.real))

    def imag_residue(self) -> float:
        if not self.is_complex:
            return 0.0
        return float(np.max(np.abs(self.values.imag)))

    def is_real(self, tol: float = 1e-13) -> bool:
        return self.imag_residue() <= tol

    # -- arithmetic ---------------------------------------------------------
    def _binary(self, other, op):
        if isinstance(other, GridFunction):
            return GridFunction(self.shape.broadcast(other.shape), op(self.values, other.values))
        return GridFunction(self.shape, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __rtruediv__(self, other):
        return self._binary(other, lambda a, b: b / a)

    def __neg__(self):
        return GridFunction(self.shape, -self.values)

    def __pow__(self, p):
        return GridFunction(self.shape, self.values ** p)

    def conj(self) -> "GridFunction":
        if not self.is_complex:
            return self
        return GridFunction(self.shape, np.conj(self.values))

    @property
    def real(self) -> "GridFunction":
        return GridFunction(self.shape, np.ascontiguousarray(self.values.real))

    @property
    def imag(self) -> "GridFunction":
        return GridFunction(self.shape, np.ascontiguousarray(self.values.imag))

    def to_real(self, tol: float | None = None) -> "GridFunction":
        """Drop the imaginary part, asserting it is at most ``tol`` when given."""
        if tol is not None:
            res = self.imag_residue()
            if res > tol:
                raise ArgumentError(f"imaginary residue {res:.3e} exceeds {tol:.1e}")
        return self.real

    def apply(self, fn: Callable) -> "GridFunction":
        """Pointwise ``fn`` (a numpy ufunc or compatible callable)."""
        return GridFunction(self.shape, fn(self.values))

    def exp(self) -> "GridFunction":
        return self.apply(np.exp)

    def expand(self, shape: GridShape) -> "GridFunction":
        """Materialize on a finer (broadcast-compatible) grid."""
        target = self.shape.broadcast(shape)
        vals = np.broadcast_to(self.values, self.batch_shape + target.sizes)
        return GridFunction(target, np.array(vals))

    def multiply(self, other: "GridFunction", dealias: bool = False) -> "GridFunction":
        """Pointwise product, optionally evaluated on a 3/2-padded grid."""
        if not dealias:
            return self * other
        shape = self.shape.broadcast(other.shape)
        a = self.expand(shape).values
        b = other.expand(shape).values
        off = a.ndim - shape.ndim
        dims = shape.active_dims
        for d in dims:
            m = (3 * shape.sizes[d] + 1) // 2
            a = fourier_resample(a, m, axis=off + d)
            b = fourier_resample(b, m, axis=off + d)
        prod = a * b
        for d in dims:
            prod = fourier_resample(prod, shape.sizes[d], axis=off + d)
        if not (self.is_complex or other.is_complex):
            prod = prod.real
        return GridFunction(shape, prod)

    # -- calculus -----------------------------------------------------------
    def derivative(self, dim: int) -> "GridFunction":
        """Spectral derivative along real dimension ``dim`` (0-based)."""
        self.shape.check_dim(dim)
        size = self.shape.sizes[dim]
        if size == 1:
            return self.zeros_like()
        axis = self._axis(dim)
        workers = fft_workers()
        return GridFunction(self.shape, _real_axis_op(self.values, axis, size, 1, workers))

    def holomorphic_derivative(self, j: int, conjugate: bool = False) -> "GridFunction":
        """``d/dz_j = (d/dx_j - i d/dy_j)/2``, or ``d/dzbar_j`` with the plus sign."""
        self.shape.check_complex_index(j)
        dx, dy = dim_of(j), dim_of(j, True)
        nx, ny = self.shape.sizes[dx], self.shape.sizes[dy]
        sign = 1.0 if conjugate else -1.0
        if nx == 1 and ny == 1:
            return GridFunction(self.shape, np.zeros(self.values.shape, dtype=complex))
        if ny == 1:
            return self.derivative(dx) * 0.5
        if nx == 1:
            return self.derivative(dy) * (0.5j * sign)
        ax, ay = self._axis(dx), self._axis(dy)
        shx = [1] * self.values.ndim
        shy = [1] * self.values.ndim
        shx[ax] = nx
        shy[ay] = ny
        kx = wavenumbers(nx).reshape(shx)
        ky = wavenumbers(ny).reshape(shy)
        # d/dx -> i kx, d/dy -> i ky
        symbol = 0.5 * (1j * kx + sign * 1j * 1j * ky)
        workers = fft_workers()
        spec = sfft.fftn(self.values, axes=(ax, ay), workers=workers)
        spec *= symbol
        return GridFunction(self.shape, sfft.ifftn(spec, axes=(ax, ay), workers=workers))

    def second_derivative(self, dim: int) -> "GridFunction":
        """Spectral ``d^2/dx^2`` along ``dim`` with the exact symbol ``-k^2``."""
        self.shape.check_dim(dim)
        size = self.shape.sizes[dim]
        if size == 1:
            return self.zeros_like()
        return GridFunction(self.shape, _real_axis_op(self.values, self._axis(dim), size, 2,
                                                      fft_workers()))

    def mixed_derivative(self, i: int, j: int) -> "GridFunction":
        """``d^2/dz_i dzbar_j`` in one pass.

        For ``i == j`` this is ``(d_xx + d_yy)/4`` with exact second-derivative
        symbols (the Nyquist mode included), so it has no kernel beyond the
        constants.  For ``i != j`` it is the product of the first-derivative
        symbols of :meth:`holomorphic_derivative`.
        """
        self.shape.check_complex_index(i)
        self.shape.check_complex_index(j)
        if i == j:
            out = None
            for dim in (dim_of(i), dim_of(i, True)):
                if self.shape.sizes[dim] > 1:
                    term = self.second_derivative(dim).values
                    out = term if out is None else out + term
            if out is None:
                return GridFunction(self.shape, np.zeros(self.values.shape, dtype=complex))
            return GridFunction(self.shape, 0.25 * out)
        nd = self.values.ndim
        symbol = None
        axes = []
        for idx, sign in ((i, -1.0), (j, 1.0)):
            part = None
            for dim, coef in ((dim_of(idx), 0.5j), (dim_of(idx, True), 0.5j * sign * 1j)):
                size = self.shape.sizes[dim]
                if size == 1:
                    continue
                ax = self._axis(dim)
                axes.append(ax)
                sh = [1] * nd
                sh[ax] = size
                term = coef * wavenumbers(size).reshape(sh)
                part = term if part is None else part + term
            if part is None:
                return GridFunction(self.shape, np.zeros(self.values.shape, dtype=complex))
            symbol = part if symbol is None else symbol * part
        axes = tuple(sorted(axes))
        workers = fft_workers()
        spec = sfft.fftn(self.values, axes=axes, workers=workers)
        spec *= symbol
        return GridFunction(self.shape, sfft.ifftn(spec, axes=axes, workers=workers))

    def mean(self):
        axes = tuple(range(self.values.ndim - self.shape.ndim, self.values.ndim))
        m = np.mean(self.values, axis=axes)
        return m.item() if np.ndim(m) == 0 else m

    def integrate(self):
        """Integral over the torus: sample mean times ``(2 pi)^(2n)``."""
        return self.mean() * TWO_PI ** self.shape.ndim

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        if self.batch_shape:
            raise ArgumentError("batched grid functions cannot be serialized")
        flat = self.values.reshape(-1)
        return {
            "n": self.shape.n,
            "sizes": list(self.shape.sizes),
            "re": [float(x) for x in flat.real],
            "im": [float(x) for x in (flat.imag if self.is_complex else np.zeros(flat.size))],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GridFunction":
        try:
            shape = GridShape(data["n"], tuple(data["sizes"]))
            re = np.asarray(data["re"], dtype=float)
            im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
        except (KeyError, TypeError) as exc:
            raise ArgumentError(f"malformed grid function JSON: {exc}") from exc
        if re.size != shape.npoints or im.size != shape.npoints:
            raise ArgumentError(
                f"grid function JSON has {re.size} samples, expected {shape.npoints}")
        vals = re if not np.any(im) else re + 1j * im
        return cls(shape, vals.reshape(shape.sizes))

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"GridFunction(n={self.n}, sizes={self.shape.sizes}, {kind})"


def zero(n: int) -> GridFunction:
    return GridFunction.constant(GridShape.scalar(n), 0.0)


def constant(n: int, value) -> GridFunction:
    return GridFunction.constant(GridShape.scalar(n), value)


def coordinate_function(shape: GridShape, dim: int) -> GridFunction:
    """The coordinate ``x_j``/``y_j`` itself on the active grid of ``dim``."""
    sizes = [1] * shape.ndim
    sizes[dim] = shape.sizes[dim]
    sub = GridShape(shape.n, tuple(sizes))
    return GridFunction(sub, sub.coordinate(dim))


def stack_batch(functions: Sequence[GridFunction]) -> GridFunction:
    shape = broadcast_shapes([f.shape for f in functions])
    vals = np.stack([np.broadcast_to(f.values, shape.sizes) for f in functions])
    return GridFunction(shape, vals)
