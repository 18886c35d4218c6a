"""Exact exterior algebra over an invariant coframe.

An algebra has odd generators ``g_1..g_m`` of type (1,0), their conjugates
``g_jbar`` (type (0,1)), and optional *formal* even generators: real closed
(1,1)-forms ``W`` with a nilpotency order (``W^order = 0``).  The user gives
``del`` and ``delbar`` of each (1,0)-generator; the tables for conjugates are
derived from ``del(conj a) = conj(delbar a)``.

Coefficients are exact Gaussian rationals, so the invariant examples produce
exact values for gamma_k.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ArgumentError, IntegrabilityError, NotInvariantError, ParseError
from .forms import sort_sign


class GaussianRational:
    """``a + b i`` with rational ``a``, ``b``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, complex):
            return cls(Fraction(x.real).limit_denominator(), Fraction(x.imag).limit_denominator())
        return cls(Fraction(x))

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def conj(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __add__(self, other):
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-GaussianRational.coerce(other))

    def __rsub__(self, other):
        return GaussianRational.coerce(other) - self

    def __mul__(self, other):
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussianRational.coerce(other)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conj()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) / self

    def __eq__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def is_real(self) -> bool:
        return self.im == 0

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


ZERO = GaussianRational(0)
ONE = GaussianRational(1)
I_UNIT = GaussianRational(0, 1)
HALF_I = GaussianRational(0, Fraction(1, 2))


# A monomial is (odd, even): odd is a sorted tuple of odd-generator slots
# (slot j < m is g_{j+1}, slot m + j is its conjugate), even is a tuple of
# exponents of the formal generators.
class CoframeAlgebra:
    def __init__(self, generators, formal=None, del_table=None, delbar_table=None,
                 formal_del=None):
        self.generators = tuple(generators)
        if len(set(self.generators)) != len(self.generators):
            raise ArgumentError("generator names must be distinct")
        self.m = len(self.generators)
        formal = dict(formal or {})
        self.formal = tuple(formal)
        self.orders = tuple(int(formal[name]) for name in self.formal)
        if any(o < 2 for o in self.orders):
            raise ArgumentError("formal generator orders must be >= 2")
        names = self.generators + tuple(g + "bar" for g in self.generators) + self.formal
        if len(set(names)) != len(names):
            raise ArgumentError("generator names clash with conjugate or formal names")
        self._slot = {name: i for i, name in enumerate(names)}
        self.n = self.m + sum(o - 1 for o in self.orders)
        self._del = {}
        self._delbar = {}
        for table, target in ((del_table or {}, self._del), (delbar_table or {}, self._delbar)):
            for name, value in table.items():
                if name not in self.generators:
                    raise ArgumentError(f"structure equations are given for (1,0)-generators only, got {name!r}")
                target[self._slot[name]] = self._as_form(value)
        self._formal_del = {}
        for name, value in (formal_del or {}).items():
            if name not in self.formal:
                raise ArgumentError(f"unknown formal generator {name!r}")
            self._formal_del[self.formal.index(name)] = self._as_form(value)

    # -- elements ---------------------------------------------------------------
    def _as_form(self, value) -> "CoframeForm":
        if isinstance(value, CoframeForm):
            if value.alg is self:
                return value
            if value.alg.names() != self.names():
                raise ArgumentError("form belongs to an algebra with different generators")
            return CoframeForm(self, value.terms)
        if isinstance(value, str):
            return parse_form(self, value)
        if value == 0:
            return self.zero()
        raise ArgumentError(f"cannot interpret {value!r} as a form")

    def zero(self) -> "CoframeForm":
        return CoframeForm(self, {})

    def scalar(self, c) -> "CoframeForm":
        return CoframeForm(self, {((), (0,) * len(self.formal)): GaussianRational.coerce(c)})

    def gen(self, name: str) -> "CoframeForm":
        if name not in self._slot:
            raise ArgumentError(f"unknown generator {name!r}")
        s = self._slot[name]
        even = [0] * len(self.formal)
        if s < 2 * self.m:
            return CoframeForm(self, {((s,), tuple(even)): ONE})
        even[s - 2 * self.m] = 1
        return CoframeForm(self, {((), tuple(even)): ONE})

    def names(self) -> tuple:
        return tuple(self._slot)

    def slot_name(self, s: int) -> str:
        return self.names()[s]

    def type_of(self, mono) -> tuple:
        odd, even = mono
        p = sum(1 for s in odd if s < self.m) + sum(even)
        q = sum(1 for s in odd if s >= self.m) + sum(even)
        return p, q

    # -- derivatives of generators --------------------------------------------------
    def _gen_derivative(self, slot: int, conjugate: bool) -> "CoframeForm":
        m = self.m
        if slot < m:
            table = self._delbar if conjugate else self._del
            return table.get(slot, self.zero())
        if slot < 2 * m:
            # del(conj a) = conj(delbar a), delbar(conj a) = conj(del a)
            table = self._del if conjugate else self._delbar
            return table.get(slot - m, self.zero()).conj()
        idx = slot - 2 * m
        base = self._formal_del.get(idx, self.zero())
        return base.conj() if conjugate else base

    def derivative(self, a: "CoframeForm", conjugate: bool) -> "CoframeForm":
        out = {}
        nf = len(self.formal)
        for (odd, even), c in a.terms.items():
            r = len(odd)
            for pos, s in enumerate(odd):
                dg = self._gen_derivative(s, conjugate)
                if dg.is_zero():
                    continue
                sign = -1 if pos % 2 else 1
                left = CoframeForm(self, {(odd[:pos], (0,) * nf): ONE})
                right = CoframeForm(self, {(odd[pos + 1:], even): ONE})
                _accumulate(out, (left * dg * right).terms, c * sign)
            for idx, e in enumerate(even):
                if e == 0:
                    continue
                dW = self._gen_derivative(2 * self.m + idx, conjugate)
                if dW.is_zero():
                    continue
                rest = list(even)
                rest[idx] -= 1
                sign = -1 if r % 2 else 1
                term = CoframeForm(self, {(odd, tuple(rest)): ONE}) * dW
                _accumulate(out, term.terms, c * (e * sign))
        return CoframeForm(self, out)

    def del_(self, a):
        return self.derivative(a, False)

    def delbar(self, a):
        return self.derivative(a, True)

    def ddbar(self, a):
        return self.del_(self.delbar(a))

    def __repr__(self):
        return (f"CoframeAlgebra(generators={list(self.generators)}, "
                f"formal={dict(zip(self.formal, self.orders))}, n={self.n})")


def _accumulate(out: dict, terms: dict, factor):
    for key, c in terms.items():
        val = out.get(key, ZERO) + c * factor
        if val.is_zero():
            out.pop(key, None)
        else:
            out[key] = val


class CoframeForm:
    """An element of the algebra: exact coefficients over canonical monomials."""

    __slots__ = ("alg", "terms")

    def __init__(self, alg: CoframeAlgebra, terms: dict):
        self.alg = alg
        self.terms = {k: GaussianRational.coerce(v) for k, v in terms.items()
                      if not GaussianRational.coerce(v).is_zero()}

    def is_zero(self) -> bool:
        return not self.terms

    def _check(self, other):
        if not isinstance(other, CoframeForm) or other.alg is not self.alg:
            raise ArgumentError("forms belong to different algebras")

    def __add__(self, other):
        if not isinstance(other, CoframeForm):
            other = self.alg.scalar(other)
        self._check(other)
        out = dict(self.terms)
        _accumulate(out, other.terms, ONE)
        return CoframeForm(self.alg, out)

    __radd__ = __add__

    def __neg__(self):
        return CoframeForm(self.alg, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, CoframeForm):
            c = GaussianRational.coerce(other)
            return CoframeForm(self.alg, {k: v * c for k, v in self.terms.items()})
        return self.wedge(other)

    def __rmul__(self, other):
        c = GaussianRational.coerce(other)
        return CoframeForm(self.alg, {k: v * c for k, v in self.terms.items()})

    def __xor__(self, other):
        return self.wedge(other)

    def wedge(self, other: "CoframeForm") -> "CoframeForm":
        self._check(other)
        orders = self.alg.orders
        out = {}
        for (o1, e1), c1 in self.terms.items():
            for (o2, e2), c2 in other.terms.items():
                seq, sign = sort_sign(o1 + o2)
                if sign == 0:
                    continue
                even = tuple(a + b for a, b in zip(e1, e2))
                if any(e >= o for e, o in zip(even, orders)):
                    continue
                # even factors sit at the end, so moving them past o2 is free
                _accumulate(out, {(seq, even): c1 * c2}, sign)
        return CoframeForm(self.alg, out)

    def power(self, k: int) -> "CoframeForm":
        out = self.alg.scalar(1)
        for _ in range(k):
            out = out.wedge(self)
        return out

    def conj(self) -> "CoframeForm":
        m = self.alg.m
        out = {}
        for (odd, even), c in self.terms.items():
            flipped = tuple(s + m if s < m else (s - m if s < 2 * m else s) for s in odd)
            seq, sign = sort_sign(flipped)
            _accumulate(out, {(seq, even): c.conj()}, sign)
        return CoframeForm(self.alg, out)

    def degree(self) -> set:
        return {len(odd) + 2 * sum(even) for odd, even in self.terms}

    def monomials(self) -> list:
        return [format_monomial(self.alg, key) for key in sorted(self.terms)]

    def __eq__(self, other):
        if not isinstance(other, CoframeForm):
            return NotImplemented
        return self.alg is other.alg and (self - other).is_zero()

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for key in sorted(self.terms):
            parts.append(f"({self.terms[key]})*{format_monomial(self.alg, key)}")
        return " + ".join(parts)

    __repr__ = __str__


def format_monomial(alg: CoframeAlgebra, key) -> str:
    odd, even = key
    parts = [alg.slot_name(s) for s in odd]
    for name, e in zip(alg.formal, even):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}**{e}")
    return "^".join(parts) if parts else "1"


# -- checks -------------------------------------------------------------------------
@dataclass
class IntegrabilityReport:
    residuals: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(not v for r in self.residuals.values() for v in r.values())

    def to_dict(self) -> dict:
        return {"ok": self.ok, "residuals": self.residuals}


def verify_integrability(alg: CoframeAlgebra, raise_on_error: bool = True) -> IntegrabilityReport:
    """Check ``del^2``, ``delbar^2``, ``del delbar + delbar del`` and bidegrees on generators."""
    report = IntegrabilityReport()
    bad = None
    for name in alg.names():
        g = alg.gen(name)
        d, db = alg.del_(g), alg.delbar(g)
        entry = {
            "del2": alg.del_(d).monomials(),
            "delbar2": alg.delbar(db).monomials(),
            "anticommutator": (alg.del_(db) + alg.delbar(d)).monomials(),
        }
        (p, q), = {alg.type_of(k) for k in g.terms}
        wrong = [format_monomial(alg, k) for k in d.terms if alg.type_of(k) != (p + 1, q)]
        wrong += [format_monomial(alg, k) for k in db.terms if alg.type_of(k) != (p, q + 1)]
        entry["bidegree"] = wrong
        s = alg._slot[name]
        if s >= 2 * alg.m:
            # a formal generator is real
            entry["reality"] = (db - d.conj()).monomials()
        report.residuals[name] = entry
        if bad is None and any(entry.values()):
            bad = name
    if bad is not None and raise_on_error:
        err = IntegrabilityError(f"structure equations are inconsistent at generator {bad!r}", bad)
        err.report = report
        raise err
    return report


def top_ratio(a: CoframeForm, b: CoframeForm) -> GaussianRational:
    """The constant ``a / b`` for two top-degree elements; raises if not proportional."""
    if b.is_zero():
        raise ArgumentError("reference top form vanishes")
    if a.is_zero():
        return ZERO
    key = next(iter(b.terms))
    ratio = a.terms.get(key, ZERO) / b.terms[key]
    if not (a - b * ratio).is_zero():
        raise NotInvariantError("the two forms are not proportional")
    return ratio


def gamma_k_invariant(alg: CoframeAlgebra, omega: CoframeForm, k: int) -> GaussianRational:
    """``(i/2) ddbar(omega^k) ^ omega^{n-k-1} / omega^n`` when it is a constant."""
    n = alg.n
    if not 1 <= k <= n - 1:
        raise ArgumentError(f"k must lie in 1..{n - 1}, got {k}")
    vol = omega.power(n)
    if vol.is_zero():
        raise ArgumentError("omega^n vanishes; omega is not a metric")
    top = alg.ddbar(omega.power(k)).wedge(omega.power(n - k - 1)) * HALF_I
    try:
        return top_ratio(top, vol)
    except NotInvariantError as exc:
        raise NotInvariantError(f"ddbar(omega^{k}) ^ omega^{n - k - 1} is not a multiple of omega^{n}") from exc


def pluriclosed_obstruction(alg: CoframeAlgebra, omega_test: CoframeForm,
                            omega0: CoframeForm) -> GaussianRational:
    """``(i/2) ddbar(omega_test) ^ omega0^{n-2}`` against the volume ``omega0^n / n!``."""
    n = alg.n
    if n < 2:
        raise ArgumentError("need complex dimension >= 2")
    fact = 1
    for j in range(2, n + 1):
        fact *= j
    vol = omega0.power(n) * GaussianRational(Fraction(1, fact))
    top = alg.ddbar(omega_test).wedge(omega0.power(n - 2)) * HALF_I
    return top_ratio(top, vol)


def is_closed(alg: CoframeAlgebra, a: CoframeForm) -> bool:
    return alg.del_(a).is_zero() and alg.delbar(a).is_zero()


# -- text format ----------------------------------------------------------------------
_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


def parse_form(alg: CoframeAlgebra, text: str) -> CoframeForm:
    """Parse sums of products like ``-phi1^phi2 + i/2*theta^thetabar``.

    ``^`` and ``*`` both multiply (wedge for generators); ``/`` divides by a
    number; ``i`` is the imaginary unit.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mt = _TOKEN.match(text, pos)
        if not mt:
            while text[pos].isspace():
                pos += 1
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = mt.lastgroup
        start = mt.start(kind)
        tokens.append((kind, mt.group(kind), start))
        pos = mt.end()
    tokens.append(("end", "", len(text)))
    it = _Cursor(tokens)
    out = _parse_sum(alg, it)
    kind, val, p = it.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r}", p)
    return out


class _Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok


def _parse_sum(alg, it):
    total = alg.zero()
    sign = 1
    kind, val, p = it.peek()
    if kind == "op" and val in "+-":
        it.take()
        sign = -1 if val == "-" else 1
    total = total + _parse_product(alg, it) * sign
    while True:
        kind, val, p = it.peek()
        if kind == "op" and val in "+-":
            it.take()
            term = _parse_product(alg, it)
            total = total + (term if val == "+" else -term)
        else:
            return total


def _parse_product(alg, it):
    out = _parse_atom(alg, it)
    while True:
        kind, val, p = it.peek()
        if kind == "op" and val in "*^":
            it.take()
            out = out * _parse_atom(alg, it)
        elif kind == "op" and val == "/":
            it.take()
            k2, v2, p2 = it.take()
            if k2 != "num":
                raise ParseError("only division by an integer is supported", p2)
            if int(v2) == 0:
                raise ParseError("division by zero", p2)
            out = out * GaussianRational(Fraction(1, int(v2)))
        else:
            return out


def _parse_atom(alg, it):
    kind, val, p = it.take()
    if kind == "num":
        return alg.scalar(int(val))
    if kind == "name":
        if val == "i":
            return alg.scalar(I_UNIT)
        if val not in alg._slot:
            raise ParseError(f"unknown generator {val!r}", p)
        return alg.gen(val)
    if kind == "op" and val == "(":
        inner = _parse_sum(alg, it)
        k2, v2, p2 = it.take()
        if v2 != ")":
            raise ParseError("expected ')'", p2)
        return inner
    if kind == "op" and val == "-":
        return -_parse_atom(alg, it)
    raise ParseError(f"unexpected {val or 'end of input'!r}", p)


_RELATION = re.compile(r"^([A-Za-z_]\w*)\s*\^\s*(\d+)\s*=\s*0$")


def parse_algebra(text: str) -> CoframeAlgebra:
    """Read the line format::

        generators phi1 phi2 phi3
        formal W order 3        # or: W^3 = 0
        del phi3 = -phi1^phi2
        delbar theta = W
    """
    gens = None
    formal = {}
    eqs = []
    offset = 0
    for raw in text.splitlines(keepends=True):
        line = raw.split("#", 1)[0].strip()
        start = offset
        offset += len(raw)
        if not line:
            continue
        head = line.split()[0]
        if head == "generators":
            gens = line.split()[1:]
            if not gens:
                raise ParseError("empty generator list", start)
        elif head == "formal":
            parts = line.split()
            if len(parts) != 4 or parts[2] != "order" or not parts[3].isdigit():
                raise ParseError("expected 'formal NAME order K'", start)
            formal[parts[1]] = int(parts[3])
        elif _RELATION.match(line):
            mt = _RELATION.match(line)
            formal[mt.group(1)] = int(mt.group(2))
        elif head in ("del", "delbar"):
            lhs, sep, rhs = line.partition("=")
            if not sep:
                raise ParseError("expected '='", start)
            parts = lhs.split()
            if len(parts) != 2:
                raise ParseError(f"expected '{head} NAME = ...'", start)
            eqs.append((head, parts[1], rhs, start + raw.index("=") + 1))
        else:
            raise ParseError(f"unrecognized line {line!r}", start)
    if gens is None:
        raise ParseError("missing 'generators' line", 0)
    alg = CoframeAlgebra(gens, formal)
    dt, dbt, fdt = {}, {}, {}
    for head, name, rhs, where in eqs:
        try:
            value = parse_form(alg, rhs)
        except ParseError as exc:
            raise ParseError(f"in {head} {name}: {exc}", where) from exc
        if name in alg.formal:
            if head == "del":
                fdt[name] = value
            else:
                fdt[name] = value.conj()
        elif name in alg.generators:
            (dt if head == "del" else dbt)[name] = value
        else:
            raise ParseError(f"unknown generator {name!r} (conjugate equations are derived)", where)
    return CoframeAlgebra(gens, formal, dt, dbt, fdt)
