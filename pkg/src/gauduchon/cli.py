"""Command-line front end.

Every command writes one JSON document to stdout and logs to stderr.
Exit codes: 0 success, 2 bad input, 3 a solver or bisection failed to converge.

Metric files are JSON::

    {"n": 3, "sizes": [1, 1, 1, 1, 256, 1],
     "entries": {"(1,1)": "1 + 0.8660254*sin(x3)", "(2,2)": "1 - 0.8660254*sin(x3)",
                 "(3,3)": "1"},
     "options": {"newton_tol": 1e-10}}

An entry is an expression string, a number, ``{"re": expr, "im": expr}`` or an
inline grid-function JSON.  A missing ``(j,i)`` defaults to the conjugate of
``(i,j)``.  Without ``sizes``, every coordinate an expression uses gets
``points`` samples (default 32).  A file holding ``{"form": <form JSON>}``
is read as a serialized (1,1)-form instead.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time

import numpy as np

from . import catalog, coframe
from .errors import GauduchonError, NonConvergenceError
from .expression import parse_expression
from .forms import Form
from .grid import GridFunction, GridShape
from .metric import HermitianMetric, OneFormPair, classify, integral_criterion
from .solver import (SIGN_TOL, PsiFunction, SolveOptions, conformal_bounds_check,
                     find_k_gauduchon, gamma_k, solve_semilinear)

log = logging.getLogger("gauduchon.cli")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGENCE = 0, 2, 3
DEFAULT_POINTS = 32
_ENTRY_KEY = re.compile(r"^\(\s*(\d+)\s*,\s*(\d+)\s*\)$")


class InputError(GauduchonError):
    """Unreadable or malformed input file."""


# -- input ------------------------------------------------------------------------
def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc


class MetricSpecFile:
    """A parsed metric file: complex dimension, grid and coefficient table."""

    def __init__(self, data: dict, source: str = "<metric>"):
        if not isinstance(data, dict):
            raise InputError(f"{source}: expected a JSON object")
        self.source = source
        self.options = dict(data.get("options") or {})
        if "form" in data:
            self.form = Form.from_json(data["form"])
            self.n = self.form.n
            self.sizes = list(self.form.shape.sizes)
            self.points = DEFAULT_POINTS
            self.entries = None
            return
        self.form = None
        try:
            self.n = int(data["n"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{source}: 'n' must be a positive integer") from exc
        self.points = int(data.get("points", DEFAULT_POINTS))
        self.sizes = list(data["sizes"]) if data.get("sizes") is not None else None
        if self.sizes is not None and len(self.sizes) != 2 * self.n:
            raise InputError(f"{source}: 'sizes' needs {2 * self.n} entries")
        raw = data.get("entries")
        if not isinstance(raw, dict) or not raw:
            raise InputError(f"{source}: 'entries' must be a non-empty object")
        self.entries = {}
        for key, value in raw.items():
            m = _ENTRY_KEY.match(key)
            if not m:
                raise InputError(f"{source}: bad entry key {key!r}, expected '(i,j)'")
            i, j = int(m.group(1)), int(m.group(2))
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise InputError(f"{source}: entry {key} out of range for n={self.n}")
            self.entries[(i, j)] = value

    @classmethod
    def load(cls, path: str) -> "MetricSpecFile":
        return cls(_load_json(path), path)

    def shape_for(self, exprs) -> GridShape:
        """Grid shape for evaluating ``exprs`` (parsed expressions)."""
        if self.sizes is not None:
            return GridShape(self.n, tuple(self.sizes))
        sizes = [1] * (2 * self.n)
        for e in exprs:
            for d in e.variables():
                sizes[d] = self.points
        return GridShape(self.n, tuple(sizes))

    def _exprs(self):
        out = []
        for value in (self.entries or {}).values():
            if isinstance(value, str):
                out.append(parse_expression(value, self.n))
            elif isinstance(value, dict) and "sizes" not in value:
                out.extend(parse_expression(str(value.get(p, "0")), self.n) for p in ("re", "im"))
        return out

    def grid(self) -> GridShape:
        if self.form is not None:
            return self.form.shape
        return self.shape_for(self._exprs())

    def evaluate(self, value, shape: GridShape) -> GridFunction:
        if isinstance(value, (int, float)):
            return GridFunction.constant(GridShape.scalar(self.n), float(value))
        if isinstance(value, str):
            return parse_expression(value, self.n).evaluate(shape)
        if isinstance(value, dict) and "sizes" in value:
            return GridFunction.from_json(value)
        if isinstance(value, dict):
            re_ = self.evaluate(value.get("re", 0.0), shape)
            im_ = self.evaluate(value.get("im", 0.0), shape)
            return re_ + im_ * 1j
        raise InputError(f"{self.source}: unsupported entry value {value!r}")

    def metric(self) -> HermitianMetric:
        if self.form is not None:
            return HermitianMetric(self.form)
        shape = self.grid()
        return HermitianMetric.from_matrix(
            self.n, {key: self.evaluate(v, shape) for key, v in sorted(self.entries.items())})

    def scalar(self, text: str) -> GridFunction:
        """Evaluate a command-line expression on this metric's grid."""
        e = parse_expression(text, self.n)
        base = self.grid()
        sizes = list(base.sizes)
        for d in e.variables():
            if sizes[d] == 1:
                sizes[d] = self.points
        return e.evaluate(GridShape(self.n, tuple(sizes)))


def _options(spec: MetricSpecFile, path: str | None) -> SolveOptions:
    data = dict(spec.options)
    if path:
        extra = _load_json(path)
        if not isinstance(extra, dict):
            raise InputError(f"{path}: expected a JSON object")
        data.update(extra)
    return SolveOptions.from_json(data)


def _one_form(path: str, spec: MetricSpecFile) -> OneFormPair:
    """``{"dz": {...}, "dzbar": {...}}`` as grid JSON, or real components by expression."""
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    if "dz" in data or "dzbar" in data:
        data.setdefault("n", spec.n)
        return OneFormPair.from_json(data)
    comps = data.get("real", data)
    dx, dy = {}, {}
    for name, value in comps.items():
        m = re.fullmatch(r"d([xy])([1-9]\d*)", name)
        if not m or int(m.group(2)) > spec.n:
            raise InputError(f"{path}: bad component {name!r}, expected dx1..dx{spec.n} or dy1..")
        target = dx if m.group(1) == "x" else dy
        target[int(m.group(2))] = spec.scalar(str(value)) if isinstance(value, str) else float(value)
    return OneFormPair.from_real(spec.n, dx, dy)


def _psi(args) -> PsiFunction:
    if not args.psi or args.psi[0] == "linear":
        if args.psi and len(args.psi) > 1:
            raise InputError("--psi linear takes no file")
        return PsiFunction.linear()
    if args.psi[0] == "table" and len(args.psi) == 2:
        data = _load_json(args.psi[1])
        if isinstance(data, dict):
            data.setdefault("kind", "table")
        return PsiFunction.from_json(data)
    raise InputError("--psi expects 'linear' or 'table FILE'")


# -- output ------------------------------------------------------------------------
def _clean(obj):
    """Make ``obj`` strict-JSON serializable (non-finite floats become null)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    return obj


def emit(doc, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(_clean(doc), sort_keys=True, allow_nan=False, indent=2))
    stream.write("\n")
    stream.flush()


def _sign_str(x: float, tol: float = SIGN_TOL) -> str:
    return "0" if abs(x) <= tol else ("+" if x > 0 else "-")


# -- commands ---------------------------------------------------------------------
def cmd_gamma(args):
    spec = MetricSpecFile.load(args.metric)
    rep = gamma_k(spec.metric(), args.k, _options(spec, args.opts))
    out = rep.to_dict(include_v=args.include_v)
    out["sign"] = _sign_str(rep.gamma)
    return out


def cmd_classify(args):
    spec = MetricSpecFile.load(args.metric)
    return classify(spec.metric(), args.tol).to_dict()


def _reproduce_one(name: str) -> dict:
    ex = catalog.EXAMPLES[name]
    t0 = time.perf_counter()
    row = {"example": name, "k": ex.k, "sign_expected": ex.expected_sign,
           "source": ex.provenance, "parameters": ex.parameters}
    if ex.kind == "coframe":
        alg, omega = ex.builder()
        coframe.verify_integrability(alg)
        g = coframe.gamma_k_invariant(alg, omega, ex.k)
        row.update(gamma=complex(g).real, gamma_exact=str(g), residual=0.0)
        if name == "s5s1":
            row["note"] = ("exact value -1/12; normalising the volume by omega0^3/3! "
                           "instead would give -1/6, only the sign is compared")
    elif ex.kind == "integral":
        val = integral_criterion(ex.builder(), ex.k)
        ref = catalog.bump_product_formula()["product"]
        row.update(gamma=val, reference=ref, residual=abs(val - ref) / abs(ref))
    else:
        rep = gamma_k(ex.builder(), ex.k)
        row.update(gamma=rep.gamma, residual=rep.residual, spread=rep.spread)
    row["sign_observed"] = _sign_str(row["gamma"], 0.0 if ex.kind == "coframe" else SIGN_TOL)
    row["sign_matches"] = row["sign_observed"] == ex.expected_sign
    row["seconds"] = time.perf_counter() - t0
    return row


def cmd_reproduce(args):
    if args.example == "all":
        return {"rows": [_reproduce_one(name) for name in sorted(catalog.EXAMPLES)]}
    return _reproduce_one(args.example)


def cmd_find_gauduchon(args):
    s1, s2 = MetricSpecFile.load(args.metric1), MetricSpecFile.load(args.metric2)
    res = find_k_gauduchon(s1.metric(), s2.metric(), args.k, args.tol, _options(s1, args.opts))
    return res.to_dict()


def cmd_conformal_check(args):
    t0 = time.perf_counter()
    spec = MetricSpecFile.load(args.metric)
    rho = spec.scalar(args.rho)
    out = conformal_bounds_check(spec.metric(), rho, args.k, _options(spec, args.opts),
                                 args.slack).to_dict()
    out.update(k=args.k, rho=args.rho, seconds=time.perf_counter() - t0)
    return out


def cmd_semilinear(args):
    spec = MetricSpecFile.load(args.metric)
    w = spec.metric()
    B = _one_form(args.B, spec) if args.B else OneFormPair.zero(spec.n)
    f = spec.scalar(args.f)
    return solve_semilinear(w, B, f, _psi(args), _options(spec, args.opts)).to_dict(args.include_v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gauduchon",
                                description="gamma_k invariants of hermitian metrics on tori")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gamma", help="solve for gamma_k and the conformal factor")
    g.add_argument("--metric", required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--opts", help="JSON file of solver options")
    g.add_argument("--include-v", action="store_true", help="embed the solution v")
    g.set_defaults(func=cmd_gamma)

    c = sub.add_parser("classify", help="Kahler / balanced / Gauduchon / pluriclosed residuals")
    c.add_argument("--metric", required=True)
    c.add_argument("--tol", type=float, default=1e-8)
    c.set_defaults(func=cmd_classify)

    r = sub.add_parser("reproduce", help="run a catalog example end to end")
    r.add_argument("--example", required=True, choices=sorted(catalog.EXAMPLES) + ["all"])
    r.set_defaults(func=cmd_reproduce)

    f = sub.add_parser("find-gauduchon", help="bisect t w1 + (1-t) w2 for gamma_k = 0")
    f.add_argument("--metric1", required=True)
    f.add_argument("--metric2", required=True)
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--opts")
    f.set_defaults(func=cmd_find_gauduchon)

    cc = sub.add_parser("conformal-check", help="compare gamma_k(e^rho w) with its bounds")
    cc.add_argument("--metric", required=True)
    cc.add_argument("--rho", required=True, help="expression in x1..xn, y1..yn")
    cc.add_argument("--k", type=int, required=True)
    cc.add_argument("--slack", type=float, default=1e-6)
    cc.add_argument("--opts")
    cc.set_defaults(func=cmd_conformal_check)

    s = sub.add_parser("semilinear", help="solve Laplacian v + psi(|grad v|^2) + <B, dv> = f + c")
    s.add_argument("--metric", required=True)
    s.add_argument("--B", help="JSON file with the 1-form B (zero when omitted)")
    s.add_argument("--f", required=True, help="expression for the right-hand side")
    s.add_argument("--psi", nargs="+", metavar="KIND", help="'linear' or 'table FILE'")
    s.add_argument("--opts")
    s.add_argument("--include-v", action="store_true")
    s.set_defaults(func=cmd_semilinear)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        doc = args.func(args)
    except NonConvergenceError as exc:
        log.error("%s", exc)
        emit({"error": str(exc), "kind": "nonconvergence", "history": exc.history})
        return EXIT_NONCONVERGENCE
    except (GauduchonError, ValueError) as exc:
        log.error("%s", exc)
        emit({"error": str(exc), "kind": type(exc).__name__})
        return EXIT_INPUT
    emit(doc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
