"""Coefficient expressions such as ``1 + 0.9*sin(x3)``.

A small Pratt parser.  Binding strength, loosest first: ``+ -``, ``* /``,
unary minus, ``^`` (right-associative).  Identifiers are the real
coordinates ``x1..xn``, ``y1..yn`` (``z_j = x_j + i y_j``), the constant
``pi`` and the functions ``sin cos exp log``.  Error positions are byte
offsets into the UTF-8 source.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ParseError
from .grid import GridFunction, GridShape, dim_of

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}
_BINARY = {"+": (10, "Add"), "-": (10, "Sub"), "*": (20, "Mul"), "/": (20, "Div"), "^": (40, "Pow")}
_UNARY_BP = 30

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


def _fmt(x: float) -> str:
    return repr(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(float(x))


# -- AST ------------------------------------------------------------------------
@dataclass(frozen=True)
class Num:
    value: float
    pos: int = 0

    def __repr__(self):
        return _fmt(self.value)


@dataclass(frozen=True)
class Var:
    name: str
    dim: int
    pos: int = 0

    def __repr__(self):
        return f"Var {self.name}"


@dataclass(frozen=True)
class Neg:
    operand: object
    pos: int = 0

    def __repr__(self):
        return f"Neg({self.operand!r})"


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    pos: int = 0

    def __repr__(self):
        return f"{_BINARY[self.op][1]}({self.left!r}, {self.right!r})"


@dataclass(frozen=True)
class Call:
    name: str
    arg: object
    pos: int = 0

    def __repr__(self):
        return f"{self.name.capitalize()}({self.arg!r})"


# -- parsing --------------------------------------------------------------------
class _Parser:
    def __init__(self, src: str, n: int):
        self.src = src
        self.n = n
        self.toks = list(self._lex(src))
        self.i = 0

    def _offset(self, char_index: int) -> int:
        return len(self.src[:char_index].encode("utf-8"))

    def _lex(self, src):
        i = 0
        while i < len(src):
            m = _TOKEN.match(src, i)
            if not m:
                raise ParseError(f"unexpected character {src[i]!r}", self._offset(i))
            kind = m.lastgroup
            if kind != "ws":
                yield kind, m.group(), self._offset(i)
            i = m.end()
        yield "end", "", self._offset(len(src))

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.take()
        if val != text or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {text!r}, found {found}", pos)

    def parse(self):
        node = self.expr(0)
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos)
        return node

    def expr(self, rbp: int):
        left = self.prefix()
        while True:
            kind, val, pos = self.peek()
            if kind != "op" or val not in _BINARY:
                return left
            lbp = _BINARY[val][0]
            if lbp <= rbp:
                return left
            self.take()
            # right associativity for ^: parse the right side one notch looser
            right = self.expr(lbp - 1 if val == "^" else lbp)
            left = Binary(val, left, right, pos)

    def prefix(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val), pos)
        if kind == "op" and val in "+-":
            operand = self.expr(_UNARY_BP)
            return operand if val == "+" else Neg(operand, pos)
        if kind == "op" and val == "(":
            node = self.expr(0)
            self.expect(")")
            return node
        if kind == "name":
            return self.identifier(val, pos)
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected {val!r}", pos)

    def identifier(self, name, pos):
        if name in FUNCTIONS:
            kind, val, p = self.peek()
            if val != "(":
                raise ParseError(f"function {name} needs a parenthesized argument", p)
            self.take()
            if self.peek()[1] == ")":
                raise ParseError(f"function {name} takes exactly 1 argument, got 0", self.peek()[2])
            arg = self.expr(0)
            kind, val, p = self.peek()
            if val == ",":
                count = 2
                self.take()
                self.expr(0)
                while self.peek()[1] == ",":
                    self.take()
                    self.expr(0)
                    count += 1
                raise ParseError(f"function {name} takes exactly 1 argument, got {count}", p)
            self.expect(")")
            return Call(name, arg, pos)
        if name == "pi":
            return Num(math.pi, pos)
        m = re.fullmatch(r"([xy])([1-9]\d*)", name)
        if m:
            j = int(m.group(2))
            if j > self.n:
                raise ParseError(f"unknown variable {name}", pos)
            return Var(name, dim_of(j, m.group(1) == "y"), pos)
        raise ParseError(f"unknown identifier {name}", pos)


@dataclass(frozen=True)
class Expression:
    """A parsed coefficient expression in complex dimension ``n``."""

    source: str
    n: int
    ast: object

    def __repr__(self):
        return repr(self.ast)

    def variables(self) -> set:
        out = set()
        stack = [self.ast]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.dim)
            elif isinstance(node, Neg):
                stack.append(node.operand)
            elif isinstance(node, Binary):
                stack.extend((node.left, node.right))
            elif isinstance(node, Call):
                stack.append(node.arg)
        return out

    def evaluate(self, shape: GridShape) -> GridFunction:
        """Evaluate on the grid nodes of ``shape``.

        The result only carries the dimensions the expression depends on, so
        ``sin(x3)`` stays one-dimensional on a 6-D grid.
        """
        if shape.n != self.n:
            raise EvaluationError(f"expression is for n={self.n}, grid has n={shape.n}")
        sizes = [1] * shape.ndim
        for d in self.variables():
            sizes[d] = shape.sizes[d]
        sub = GridShape(shape.n, tuple(sizes))
        env = {d: sub.coordinate(d) for d in self.variables()}
        with np.errstate(all="ignore"):
            vals = self._eval(self.ast, env, sub)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), sub.sizes)
        return GridFunction(sub, np.array(vals))

    def evaluate_point(self, coords) -> float:
        """Evaluate at one point; ``coords`` maps names like ``"x3"`` to floats."""
        env = {}
        for name, value in coords.items():
            m = re.fullmatch(r"([xy])([1-9]\d*)", name)
            if not m:
                raise EvaluationError(f"bad coordinate name {name!r}")
            env[dim_of(int(m.group(2)), m.group(1) == "y")] = np.asarray(float(value))
        with np.errstate(all="ignore"):
            return float(self._eval(self.ast, env, None))

    def _where(self, bad, node, shape) -> str:
        msg = f"at offset {node.pos}"
        if shape is not None and np.ndim(bad) > 0:
            idx = np.unravel_index(int(np.argmax(np.broadcast_to(bad, shape.sizes))), shape.sizes)
            msg += f", grid index {tuple(int(i) for i in idx)}"
        return msg

    def _eval(self, node, env, shape):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            if node.dim not in env:
                raise EvaluationError(f"no value for variable {node.name} (at offset {node.pos})")
            return env[node.dim]
        if isinstance(node, Neg):
            return -self._eval(node.operand, env, shape)
        if isinstance(node, Call):
            a = self._eval(node.arg, env, shape)
            if node.name == "log":
                bad = np.asarray(a) <= 0
                if np.any(bad):
                    raise EvaluationError(f"log of a non-positive value {self._where(bad, node, shape)}")
            return FUNCTIONS[node.name](a)
        a = self._eval(node.left, env, shape)
        b = self._eval(node.right, env, shape)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            bad = np.asarray(b) == 0
            if np.any(bad):
                raise EvaluationError(f"division by zero {self._where(bad, node, shape)}")
            return a / b
        out = np.power(np.asarray(a, dtype=float), b)
        bad = ~np.isfinite(out)
        if np.any(bad):
            raise EvaluationError(f"power is undefined {self._where(bad, node, shape)}")
        return out


def parse_expression(src: str, n: int = 3) -> Expression:
    """Parse ``src`` for complex dimension ``n``; raises :class:`ParseError`."""
    if not isinstance(src, str):
        raise ParseError(f"expression must be a string, got {type(src).__name__}", 0)
    return Expression(src, int(n), _Parser(src, int(n)).parse())


def evaluate(src: str, shape: GridShape) -> GridFunction:
    return parse_expression(src, shape.n).evaluate(shape)
