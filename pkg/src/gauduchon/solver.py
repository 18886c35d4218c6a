"""Continuation-Newton solver for the semilinear equation and the gamma_k invariant.

The unknown is a pair ``(v, c)`` with ``v`` normalized by ``int v omega^n = 0``.
A family ``N(v) - c = t f`` is followed from ``t = 0`` (where ``v = 0``) to
``t = 1``.  Each Newton step solves the bordered system::

    [ J   -1 ] [h ]   [-r]
    [ rho  0 ] [dc] = [ 0]

densely for small grids and with right-preconditioned GMRES otherwise.  The
preconditioner is the constant-coefficient operator ``sum_j a_j d_j dbar_j``
with ``a_j`` the volume-average of ``g^{j jbar}``.

Two discretizations of the gamma_k problem are offered.  ``"conservative"``
evaluates ``N(v) = F(v) - phi`` through the forms engine, so the discrete
total-derivative structure survives (``gamma_{n-1}`` comes out as zero to
Newton accuracy even on coarse grids).  ``"semilinear"`` uses the expanded
form ``Laplacian + |grad|^2 + <B1, d.>`` with ``psi(t) = t``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import ArgumentError, NonConvergenceError
from .forms import HALF_I, ddbar, integrate_top, wedge
from .grid import GridFunction, GridShape, fft_workers
from .metric import (HermitianMetric, OneFormPair, b1_form, combine, conformal_numerator,
                     differential, grad_norm_sq, laplacian, nonlinear_F, pair, phi_k)

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096
BATCH = 512
MEAN_TOL = 1e-10
SIGN_TOL = 1e-8


# -- psi ------------------------------------------------------------------------
@dataclass(frozen=True)
class PsiFunction:
    """A scalar function with derivative, plus declared growth parameters."""

    value: Callable
    derivative: Callable
    name: str = "custom"
    mu: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0.5:
            raise ArgumentError(f"psi growth exponent mu must exceed 1/2, got {self.mu}")
        if not self.nu > 0:
            raise ArgumentError(f"psi growth constant nu must be positive, got {self.nu}")

    @classmethod
    def linear(cls, shift: float = 0.0) -> "PsiFunction":
        """``psi(t) = t + shift``."""
        return cls(lambda t: np.asarray(t, dtype=float) + shift,
                   lambda t: np.ones_like(np.asarray(t, dtype=float)),
                   name="linear" if shift == 0 else f"linear{shift:+g}")

    @classmethod
    def table(cls, ts, values, mu: float = 1.0, nu: float | None = None) -> "PsiFunction":
        """Cubic spline through ``(ts, values)``; extrapolates the end cubics."""
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)
        if ts.ndim != 1 or ts.shape != values.shape or ts.size < 4:
            raise ArgumentError("a psi table needs matching 1-D arrays with at least 4 samples")
        if np.any(np.diff(ts) <= 0):
            raise ArgumentError("psi table abscissae must be strictly increasing")
        spline = CubicSpline(ts, values)
        dspline = spline.derivative()
        if nu is None:
            # largest nu consistent with the sampled tail
            tail = ts[ts > 0][-max(1, ts.size // 4):]
            nu = float(np.min(spline(tail) / tail ** mu)) if tail.size else 1.0
            nu = nu if nu > 0 else 1e-300
        return cls(lambda t: spline(np.asarray(t, dtype=float)),
                   lambda t: dspline(np.asarray(t, dtype=float)), name="table", mu=mu, nu=nu)

    @classmethod
    def from_json(cls, data: dict) -> "PsiFunction":
        kind = data.get("kind", "table")
        if kind == "linear":
            return cls.linear(float(data.get("shift", 0.0)))
        try:
            return cls.table(data["t"], data["psi"], float(data.get("mu", 1.0)), data.get("nu"))
        except KeyError as exc:
            raise ArgumentError(f"psi table JSON lacks {exc}") from exc

    def __call__(self, t):
        return self.value(t)

    def prime(self, t) -> np.ndarray:
        out = np.asarray(self.derivative(t), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ArgumentError("psi' is not finite on the sampled range")
        return out

    def certificate(self, t0: float = 1.0, t1: float = 1e3, samples: int = 64) -> dict:
        """Sampled check of ``psi(t) >= nu t^mu`` on ``[t0, t1]`` (not a proof)."""
        ts = np.geomspace(t0, t1, samples)
        ratio = np.asarray(self.value(ts), dtype=float) / ts ** self.mu
        return {"mu": self.mu, "nu": self.nu, "range": [t0, t1],
                "min_ratio": float(np.min(ratio)), "holds": bool(np.all(ratio >= self.nu))}


# -- options and reports ----------------------------------------------------------
@dataclass
class SolveOptions:
    newton_tol: float = 1e-10
    krylov_tol: float = 1e-12
    max_newton: int = 25
    min_step: float = 1e-3
    dealias: bool = False
    initial_guess: object = None
    method: str = "conservative"
    dense_limit: int = DENSE_LIMIT

    def __post_init__(self):
        if self.newton_tol <= 0 or self.krylov_tol <= 0:
            raise ArgumentError("tolerances must be positive")
        if self.max_newton < 1:
            raise ArgumentError("max_newton must be >= 1")
        if not 0 < self.min_step <= 1:
            raise ArgumentError("min_step must lie in (0, 1]")
        if self.method not in ("conservative", "semilinear"):
            raise ArgumentError(f"unknown method {self.method!r}")

    @classmethod
    def from_json(cls, data: dict | None) -> "SolveOptions":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ArgumentError(f"unknown solver options: {sorted(extra)}")
        return cls(**data)

    def to_json(self) -> dict:
        out = asdict(self)
        if isinstance(self.initial_guess, GridFunction):
            out["initial_guess"] = self.initial_guess.to_json()
        return out


@dataclass
class SolveReport:
    gamma: float | None
    v: GridFunction
    c: float
    continuation_path: list
    sup_grad_v: float
    c_bounds: tuple
    runtime: float
    residual: float
    mean_v: float
    k: int | None = None
    method: str = "semilinear"
    gamma_formulas: dict = field(default_factory=dict)
    spread: float = 0.0
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def c_within_bounds(self) -> bool:
        lo, hi = self.c_bounds
        return lo - 1e-8 <= self.c <= hi + 1e-8

    def to_dict(self, include_v: bool = False) -> dict:
        out = {
            "gamma": self.gamma,
            "k": self.k,
            "method": self.method,
            "c": self.c,
            "c_bounds": list(self.c_bounds),
            "c_within_bounds": self.c_within_bounds,
            "residual": self.residual,
            "mean_v": self.mean_v,
            "sup_grad_v": self.sup_grad_v,
            "v_oscillation": self.v.max() - self.v.min(),
            "continuation_path": [{"t": t, "newton_iters": it, "residual": r}
                                  for t, it, r in self.continuation_path],
            "gamma_formulas": self.gamma_formulas,
            "spread": self.spread,
            "warnings": list(self.warnings),
            "diagnostics": self.diagnostics,
            "seconds": self.runtime,
        }
        if include_v:
            out["v"] = self.v.to_json()
        return out


# -- problems -------------------------------------------------------------------
class _Problem:
    """``N(v)``, its Jacobian, the volume weights and a preconditioner symbol."""

    def __init__(self, w: HermitianMetric, shape: GridShape):
        self.w = w
        self.shape = shape
        dens = w.volume_density().expand(shape).values
        self.weights = dens / np.sum(dens)
        self.coef = {}
        for j in range(1, w.n + 1):
            g = w.inverse.get((j, j))
            self.coef[j] = 0.0 if g is None else float(np.sum(self.weights * g.expand(shape).values.real))
        self._symbol = None

    def residual(self, v: GridFunction) -> GridFunction:
        raise NotImplementedError

    def jacobian(self, v: GridFunction):
        """Return ``h -> J h`` (accepting batched ``h``)."""
        raise NotImplementedError

    def mean(self, u: GridFunction):
        axes = tuple(range(u.values.ndim - self.shape.ndim, u.values.ndim))
        return np.sum(np.broadcast_to(u.values, u.batch_shape + self.shape.sizes) * self.weights,
                      axis=axes)

    # spectral helpers on raw arrays shaped like the grid (optional leading batch)
    def _axes(self, arr):
        off = arr.ndim - self.shape.ndim
        return tuple(off + d for d in self.shape.active_dims)

    def symbol(self) -> np.ndarray:
        if self._symbol is None:
            sym = np.zeros(self.shape.sizes)
            nd = self.shape.ndim
            for d in self.shape.active_dims:
                size = self.shape.sizes[d]
                sh = [1] * nd
                sh[d] = size
                k = np.fft.fftfreq(size, 1.0 / size)
                sym = sym - 0.25 * self.coef[d // 2 + 1] * (k ** 2).reshape(sh)
            self._symbol = sym
        return self._symbol

    def precondition(self, r: np.ndarray, s: float):
        """Approximate inverse of the bordered operator applied to ``(r, s)``."""
        sym = self.symbol()
        dc = -float(np.mean(r))
        if not self.shape.active_dims:
            return np.full(r.shape, s), dc
        axes = self._axes(r)
        spec = sfft.fftn(r + dc, axes=axes, workers=fft_workers())
        inv = np.zeros_like(sym)
        good = np.abs(sym) > 0
        inv[good] = 1.0 / sym[good]
        h = sfft.ifftn(spec * inv, axes=axes, workers=fft_workers()).real
        h = h + (s - float(np.sum(self.weights * h)))
        return h, dc


class SemilinearProblem(_Problem):
    """``N(v) = Laplacian v + psi(|grad v|^2) + <B, dv>``."""

    def __init__(self, w, shape, B: OneFormPair, psi: PsiFunction, dealias=False):
        super().__init__(w, shape)
        self.B = B
        self.psi = psi
        self.dealias = dealias
        self.psi_prime_min = math.inf

    def residual(self, v):
        out = laplacian(self.w, v, dealias=self.dealias)
        gn = grad_norm_sq(self.w, v, self.dealias)
        out = out + GridFunction(gn.shape, np.asarray(self.psi(gn.values), dtype=float))
        if not self.B.is_zero():
            out = out + pair(self.w, self.B, differential(v), self.dealias)
        return out.expand(self.shape) if out.shape != self.shape else out

    def jacobian(self, v):
        dv = differential(v)
        gn = grad_norm_sq(self.w, v, self.dealias)
        pp = self.psi.prime(gn.values)
        self.psi_prime_min = min(self.psi_prime_min, float(np.min(pp)))
        Bt = self.B + dv * GridFunction(gn.shape, 2.0 * pp)

        def apply(h):
            return laplacian(self.w, h, dealias=self.dealias) + pair(self.w, Bt, differential(h),
                                                                     self.dealias)
        return apply


class ConformalProblem(_Problem):
    """``N(v) = F(v) - phi`` with ``F`` evaluated through the forms engine."""

    def __init__(self, w, shape, k: int, phi: GridFunction):
        super().__init__(w, shape)
        self.k = k
        self.phi = phi

    def residual(self, v):
        return (nonlinear_F(self.w, self.k, v) - self.phi).expand(self.shape)

    def jacobian(self, v):
        n = self.w.n
        ev = v.exp()
        Fv = nonlinear_F(self.w, self.k, v)

        def apply(h):
            q = conformal_numerator(self.w, self.k, h * ev).real
            return q * (n / ev) - h * Fv
        return apply


# -- Newton / continuation ----------------------------------------------------------
def _as_field(u: GridFunction, shape: GridShape) -> np.ndarray:
    vals = np.broadcast_to(u.values, u.batch_shape + shape.sizes)
    return np.ascontiguousarray(vals.real)


def _dense_matrix(prob: _Problem, apply) -> np.ndarray:
    shape = prob.shape
    m = shape.npoints
    A = np.empty((m, m))
    for start in range(0, m, BATCH):
        stop = min(m, start + BATCH)
        E = np.zeros((stop - start, m))
        E[np.arange(stop - start), np.arange(start, stop)] = 1.0
        out = apply(GridFunction(shape, E.reshape((stop - start,) + shape.sizes)))
        A[:, start:stop] = _as_field(out, shape).reshape(stop - start, m).T
    return A


class _Newton:
    def __init__(self, prob: _Problem, opts: SolveOptions):
        self.prob = prob
        self.opts = opts
        self.m = prob.shape.npoints
        self.dense = self.m <= opts.dense_limit
        self.krylov_iters = 0

    def _step(self, v: GridFunction, r: np.ndarray):
        prob = self.prob
        apply = prob.jacobian(v)
        shape = prob.shape
        m = self.m
        w = prob.weights.reshape(-1)
        rhs = np.concatenate([-r.reshape(-1), [0.0]])
        if self.dense:
            K = np.zeros((m + 1, m + 1))
            K[:m, :m] = _dense_matrix(prob, apply)
            K[:m, m] = -1.0
            K[m, :m] = w
            sol = np.linalg.solve(K, rhs)
            return sol[:m].reshape(shape.sizes), float(sol[m])

        def precond(y):
            return prob.precondition(y[:m].reshape(shape.sizes), float(y[m]))

        def matvec(y):
            h, dc = precond(y)
            Jh = _as_field(apply(GridFunction(shape, h)), shape)
            return np.concatenate([Jh.reshape(-1) - dc, [float(np.dot(w, h.reshape(-1)))]])

        op = LinearOperator((m + 1, m + 1), matvec=matvec, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        y, info = gmres(op, rhs, rtol=self.opts.krylov_tol, atol=0.0, restart=40, maxiter=3,
                        callback=cb, callback_type="pr_norm")
        self.krylov_iters += count[0]
        if info != 0:
            true = np.linalg.norm(rhs - op.matvec(y)) / max(np.linalg.norm(rhs), 1e-300)
            log.debug("gmres stopped with info=%s after %d iterations (relative residual %.2e)",
                      info, count[0], true)
        h, dc = precond(y)
        return h, dc

    def solve(self, v: GridFunction, tf: np.ndarray):
        """Newton on ``N(v) - c = tf``; returns ``(v, c, iters, residual, ok)``."""
        prob = self.prob
        r0 = None
        v = self._project(v)
        for it in range(self.opts.max_newton + 1):
            Nv = _as_field(prob.residual(v), prob.shape)
            c = float(np.sum(prob.weights * Nv))
            r = Nv - c - tf
            res = float(np.max(np.abs(r))) if r.size else 0.0
            if not math.isfinite(res):
                return v, c, it, res, False
            if r0 is None:
                r0 = max(res, 1e-300)
            if res <= self.opts.newton_tol:
                return v, c, it, res, True
            if res > 1e6 * r0 or it == self.opts.max_newton:
                return v, c, it, res, False
            h, _ = self._step(v, r)
            if not np.all(np.isfinite(h)):
                return v, c, it, math.inf, False
            v = self._project(GridFunction(prob.shape, v.values + h))
        return v, c, self.opts.max_newton, res, False

    def _project(self, v: GridFunction) -> GridFunction:
        vals = _as_field(v, self.prob.shape)
        vals = vals - float(np.sum(self.prob.weights * vals))
        return GridFunction(self.prob.shape, vals)


def _continuation(prob: _Problem, f: np.ndarray, opts: SolveOptions, v0: GridFunction):
    newton = _Newton(prob, opts)
    t, step = 0.0, 1.0
    v = v0
    c = 0.0
    path = []
    history = []
    while t < 1.0:
        t_try = min(1.0, t + step)
        v_new, c_new, iters, res, ok = newton.solve(v, t_try * f)
        history.append({"t": t_try, "newton_iters": iters, "residual": res, "accepted": ok})
        if ok:
            t, v, c = t_try, v_new, c_new
            path.append((t, iters, res))
            log.info("continuation t=%.4g accepted after %d Newton steps (residual %.2e)", t, iters, res)
            step = min(1.0, 2.0 * step)
        else:
            step *= 0.5
            log.info("continuation step to t=%.4g failed (residual %.2e); step -> %.3g",
                     t_try, res, step)
            if step < opts.min_step:
                raise NonConvergenceError(
                    f"continuation stalled at t={t:.6g} (step below {opts.min_step})", history)
    return v, c, path, newton


def _initial_guess(opts: SolveOptions, shape: GridShape) -> GridFunction:
    g = opts.initial_guess
    if g is None:
        return GridFunction.constant(shape, 0.0).expand(shape)
    if isinstance(g, dict):
        if "random" in g:
            return random_band_limited(shape, int(g["random"]), amplitude=float(g.get("amplitude", 0.1)))
        g = GridFunction.from_json(g)
    if not isinstance(g, GridFunction):
        raise ArgumentError("initial_guess must be a grid function, its JSON, or {'random': seed}")
    return g.expand(shape).real


def random_band_limited(shape: GridShape, seed: int, modes: int = 2, amplitude: float = 0.1,
                        terms: int = 4) -> GridFunction:
    """A real trigonometric polynomial with |wavenumber| <= ``modes`` on the active dims."""
    rng = np.random.default_rng(seed)
    X = shape.coordinates()
    dims = shape.active_dims
    out = np.zeros(shape.sizes)
    if not dims:
        return GridFunction(shape, out)
    for _ in range(terms):
        phase = rng.uniform(0, 2 * math.pi)
        arg = phase
        for d in dims:
            lim = min(modes, (shape.sizes[d] - 1) // 2)
            arg = arg + rng.integers(-lim, lim + 1) * X[d]
        out = out + amplitude * rng.uniform(-1, 1) * np.cos(arg)
    return GridFunction(shape, out)


def _report(prob, v, c, path, f, psi0, t0, newton, **extra) -> SolveReport:
    w = prob.w
    gn = grad_norm_sq(w, v)
    mean_v = float(np.sum(prob.weights * _as_field(v, prob.shape)))
    diag = {"dense": newton.dense, "krylov_iters": newton.krylov_iters,
            "grid_points": prob.shape.npoints}
    return SolveReport(
        gamma=extra.pop("gamma", None), v=v, c=c, continuation_path=path,
        sup_grad_v=float(math.sqrt(max(gn.max(), 0.0))),
        c_bounds=(psi0 - float(np.max(f)), psi0 - float(np.min(f))),
        runtime=time.perf_counter() - t0,
        residual=path[-1][2] if path else 0.0, mean_v=mean_v, diagnostics=diag, **extra)


def solve_semilinear(w: HermitianMetric, B: OneFormPair, f: GridFunction,
                     psi: PsiFunction | None = None, opts: SolveOptions | None = None) -> SolveReport:
    """Solve ``Laplacian v + psi(|grad v|^2) + <B, dv> = f + c`` with ``int v omega^n = 0``."""
    t0 = time.perf_counter()
    opts = opts or SolveOptions()
    psi = psi or PsiFunction.linear()
    if f.n != w.n or B.n != w.n:
        raise ArgumentError("metric, B and f must share the complex dimension")
    if f.is_complex:
        f = f.to_real(1e-11 * max(1.0, f.sup_norm()))
    shape = w.shape.broadcast(f.shape)
    for comp in B.dz + B.dzbar:
        if comp is not None:
            shape = shape.broadcast(comp.shape)
    prob = SemilinearProblem(w, shape, B, psi, opts.dealias)
    warnings = []
    fv = _as_field(f, shape)
    fmean = float(np.sum(prob.weights * fv))
    if abs(fmean) > MEAN_TOL * max(1.0, float(np.max(np.abs(fv)))):
        msg = f"f has volume-average {fmean:.3e}; subtracting it"
        log.warning(msg)
        warnings.append(msg)
    fv = fv - fmean
    psi0 = float(psi(np.array(0.0)))
    v, c, path, newton = _continuation(prob, fv, opts, _initial_guess(opts, shape))
    rep = _report(prob, v, c, path, fv, psi0, t0, newton, method="semilinear", warnings=warnings)
    rep.diagnostics["psi_prime_min"] = prob.psi_prime_min
    if prob.psi_prime_min < 0:
        rep.warnings.append("psi' < 0 on the solution range; the first-order term loses its sign")
    rep.diagnostics["psi_certificate"] = psi.certificate()
    return rep


def gamma_formulas(w: HermitianMetric, k: int, v: GridFunction, phi: GridFunction | None = None):
    """The three expressions for gamma_k at a solution ``v``; returns ``(values, spread)``."""
    n = w.n
    phi = phi_k(w, k) if phi is None else phi
    F = nonlinear_F(w, k, v)
    defgam = float(w.average(F)) / n
    expanded = laplacian(w, v) + grad_norm_sq(w, v) + pair(w, b1_form(w, k), differential(v)) + phi
    gam1 = float(w.average(expanded)) / n
    top = wedge(ddbar(w.power(k) * v.exp()), w.power(n - k - 1))
    num = (HALF_I * integrate_top(top)).real if not top.is_zero() else 0.0
    den = integrate_top(w.volume * v.exp()).real
    gam2 = float(num / den)
    vals = {"defgam": defgam, "gam1": gam1, "gam2": gam2}
    spread = (max(vals.values()) - min(vals.values())) / max(1.0, abs(defgam))
    return vals, spread


def gamma_k(w: HermitianMetric, k: int, opts: SolveOptions | None = None) -> SolveReport:
    """The constant ``gamma_k`` with ``(i/2) ddbar(e^v w^k) ^ w^{n-k-1} = gamma_k e^v w^n``."""
    t0 = time.perf_counter()
    opts = opts or SolveOptions()
    n = w.n
    if not 1 <= k <= n - 1:
        raise ArgumentError(f"k must lie in 1..{n - 1}, got {k}")
    shape = w.shape
    phi = phi_k(w, k)
    avg_phi = float(w.average(phi))
    fv = avg_phi - _as_field(phi, shape)
    method = opts.method
    warnings = []
    if method == "conservative":
        prob = ConformalProblem(w, shape, k, phi)
        try:
            v, c, path, newton = _continuation(prob, fv, opts, _initial_guess(opts, shape))
        except NonConvergenceError as exc:
            # badly scaled metrics can put the roundoff floor of F above newton_tol;
            # the expanded operator solves the same equation with less cancellation
            msg = f"conservative path failed ({exc}); retried with the semilinear form"
            log.warning(msg)
            warnings.append(msg)
            method = "semilinear"
    if method == "semilinear":
        prob = SemilinearProblem(w, shape, b1_form(w, k), PsiFunction.linear(), opts.dealias)
        v, c, path, newton = _continuation(prob, fv, opts, _initial_guess(opts, shape))
    gamma = (c + avg_phi) / n
    vals, spread = gamma_formulas(w, k, v, phi)
    rep = _report(prob, v, c, path, fv, 0.0, t0, newton, gamma=gamma, k=k, method=method,
                  gamma_formulas=vals, spread=spread, warnings=warnings)
    rep.diagnostics["avg_phi"] = avg_phi
    rep.runtime = time.perf_counter() - t0
    return rep


# -- bisection --------------------------------------------------------------------
def _sign(x: float, tol: float = 0.0) -> int:
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def bisect_sign_change(evaluate: Callable, tol: float, lo: float = 0.0, hi: float = 1.0,
                       max_iter: int = 60, f_lo=None, f_hi=None):
    """Bisection for ``evaluate(t).gamma = 0``; returns ``(t, report, history)``.

    ``evaluate`` maps ``t`` to an object with a ``gamma`` attribute.
    """
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    r_lo = f_lo if f_lo is not None else evaluate(lo)
    r_hi = f_hi if f_hi is not None else evaluate(hi)
    g_lo, g_hi = r_lo.gamma, r_hi.gamma
    history = [{"t": lo, "gamma": g_lo}, {"t": hi, "gamma": g_hi}]
    if abs(g_lo) <= tol:
        return lo, r_lo, history
    if abs(g_hi) <= tol:
        return hi, r_hi, history
    if _sign(g_lo) == _sign(g_hi):
        raise ArgumentError(f"endpoints do not bracket a sign change (gamma {g_lo:.3e}, {g_hi:.3e})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r_mid = evaluate(mid)
        g = r_mid.gamma
        history.append({"t": mid, "gamma": g})
        if abs(g) <= tol:
            return mid, r_mid, history
        if _sign(g) == _sign(g_lo):
            lo, g_lo = mid, g
        else:
            hi, g_hi = mid, g
    raise NonConvergenceError(f"bisection did not reach |gamma| <= {tol:g} in {max_iter} steps",
                              history)


@dataclass
class BisectionResult:
    t_star: float
    metric: HermitianMetric
    report: SolveReport
    history: list
    k_gauduchon_residual: float

    def to_dict(self) -> dict:
        return {"t_star": self.t_star, "gamma": self.report.gamma,
                "k_gauduchon_residual": self.k_gauduchon_residual,
                "history": self.history, "report": self.report.to_dict()}


def find_k_gauduchon(w1: HermitianMetric, w2: HermitianMetric, k: int, tol: float,
                     opts: SolveOptions | None = None, max_iter: int = 60) -> BisectionResult:
    """Locate ``t`` with ``gamma_k(t w1 + (1-t) w2) = 0`` and return the k-th Gauduchon metric.

    The returned metric is ``e^{v/k} omega_t``, with ``v`` from the gamma_k solve.
    """
    from .metric import classify

    opts = opts or SolveOptions()

    def evaluate(t):
        return gamma_k(combine(t, w1, w2), k, opts)

    r1, r2 = evaluate(1.0), evaluate(0.0)
    for r in (r1, r2):
        if abs(r.gamma) <= tol:
            raise ArgumentError(f"endpoint gamma {r.gamma:.3e} is within tol of zero")
    t, rep, history = bisect_sign_change(evaluate, tol, 0.0, 1.0, max_iter, f_lo=r2, f_hi=r1)
    wt = combine(t, w1, w2)
    adjusted = wt.conformal(rep.v * (1.0 / k))
    resid = classify(adjusted, 1.0).k_gauduchon_residuals[k]
    return BisectionResult(t, adjusted, rep, history, resid)


# -- conformal sandwich -------------------------------------------------------------
@dataclass
class ConformalReport:
    gamma: float
    gamma_conformal: float
    lower: float
    upper: float
    rho_min: float
    rho_max: float
    slack: float
    holds: bool
    sign_equal: bool

    def to_dict(self) -> dict:
        return asdict(self)


def conformal_bounds_check(w: HermitianMetric, rho: GridFunction, k: int,
                           opts: SolveOptions | None = None, slack: float = 1e-6) -> ConformalReport:
    """Compare ``gamma_k(e^rho w)`` with ``e^{-max rho} gamma_k(w)`` and ``e^{-min rho} gamma_k(w)``."""
    if rho.is_complex:
        rho = rho.to_real(1e-13)
    g = gamma_k(w, k, opts).gamma
    gt = gamma_k(w.conformal(rho), k, opts).gamma
    a, b = math.exp(-rho.max()) * g, math.exp(-rho.min()) * g
    lower, upper = min(a, b), max(a, b)
    holds = lower - slack <= gt <= upper + slack
    sign_equal = _sign(g, SIGN_TOL) == _sign(gt, SIGN_TOL)
    return ConformalReport(g, gt, lower, upper, rho.min(), rho.max(), slack, holds, sign_equal)
