"""Scalar expressions for metric coefficients, with second-order forward jets.

Grammar (fixed, no user functions)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'

``IDENT`` is one of the declared variable names (``x1..xn`` by default) or the
constant ``pi``.  ``FUNC`` is one of ``exp log sin cos sqrt``.  Positions in
error messages are 1-based columns.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class ExprDomainError(ExprError):
    """Evaluation left the domain of an elementary function."""


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or a FUNCTIONS member
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


Node = Const | Var | Unary | Binary


@dataclass(frozen=True)
class Expr:
    """Parsed expression; immutable, evaluation is pure."""

    root: Node
    variables: tuple[str, ...]
    source: str

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def __call__(self, *coords):
        return eval_value(self, np.asarray(coords, dtype=float) if len(coords) > 1 else coords[0])

    def __str__(self) -> str:
        return self.source


# ------------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[col - 1]!r}", col)
        kind = m.lastgroup
        text = m.group(kind)
        tokens.append((kind, text, m.start(kind) + 1))
        pos = m.end()
    tokens.append(("eof", "", len(source) + 1))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.variables = tuple(variables)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, tok, pos = self.take()
        if tok != text:
            found = "end of input" if kind == "eof" else repr(tok)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, tok, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected token {tok!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()[1]
        if tok == "-":
            self.take()
            return Unary("neg", self.unary())
        if tok == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, tok, pos = self.take()
        if kind == "num":
            return Const(float(tok))
        if kind == "ident":
            if tok in FUNCTIONS:
                self.expect("(")
                if self.peek()[1] == ")":
                    raise ExprSyntaxError(f"{tok}() takes exactly one argument, got 0", self.peek()[2])
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise ExprSyntaxError(f"{tok}() takes exactly one argument", self.peek()[2])
                self.expect(")")
                return Unary(tok, arg)
            if tok in self.variables:
                return Var(self.variables.index(tok), tok)
            if tok in CONSTANTS:
                return Const(CONSTANTS[tok])
            raise ExprSyntaxError(f"unknown identifier {tok!r}", pos)
        if tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "eof" else repr(tok)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def default_variables(n: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(n))


def parse_expr(source: str, variables: Sequence[str] | int = 3) -> Expr:
    """Parse ``source``; ``variables`` is a name list or a count ``n`` for x1..xn."""
    if isinstance(variables, int):
        variables = default_variables(variables)
    if not isinstance(source, str):
        raise ExprSyntaxError("expression must be text", 1)
    root = _Parser(source, variables).parse()
    return Expr(root, tuple(variables), source)


# ------------------------------------------------------------------------- jets


class Jet:
    """Value, gradient and Hessian carried together (forward mode, order 2).

    Shapes: ``val`` is ``S``, ``grad`` is ``(n,) + S``, ``hess`` is ``(n, n) + S``
    where ``S`` is the (broadcast) shape of the evaluation points.  ``hess`` is
    ``None`` when only first order was requested.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    # f(a) given f, f', f'' at a
    def _chain(self, f0, f1, f2):
        grad = f1 * self.grad
        hess = None
        if self.hess is not None:
            hess = f1 * self.hess + f2 * self.grad[:, None] * self.grad[None, :]
        return Jet(f0, grad, hess)

    def __add__(self, other):
        if isinstance(other, Jet):
            hess = None if self.hess is None else self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, hess)
        return Jet(self.val + other, self.grad, self.hess)

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            grad = a.val * b.grad + b.val * a.grad
            hess = None
            if a.hess is not None:
                cross = a.grad[:, None] * b.grad[None, :]
                hess = a.val * b.hess + b.val * a.hess + cross + np.swapaxes(cross, 0, 1)
            return Jet(a.val * b.val, grad, hess)
        return Jet(self.val * other, self.grad * other, None if self.hess is None else self.hess * other)

    def reciprocal(self):
        v = self.val
        if np.any(v == 0):
            raise ExprDomainError("division by zero")
        inv = 1.0 / v
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        if np.any(np.asarray(other) == 0):
            raise ExprDomainError("division by zero")
        return self * (1.0 / other)

    def ipow(self, k: int):
        v = self.val
        if k == 0:
            return Jet(np.ones_like(v), np.zeros_like(self.grad), None if self.hess is None else np.zeros_like(self.hess))
        if k < 0 and np.any(v == 0):
            raise ExprDomainError("division by zero")
        f0 = v**k
        f1 = k * v ** (k - 1) if k != 1 else np.ones_like(v)
        f2 = k * (k - 1) * v ** (k - 2) if k not in (0, 1, 2) else np.full_like(v, float(k * (k - 1)))
        return self._chain(f0, f1, f2)

    def fpow(self, q: float):
        v = self.val
        if np.any(v <= 0):
            raise ExprDomainError("non-integer power of a non-positive value")
        return self._chain(v**q, q * v ** (q - 1), q * (q - 1) * v ** (q - 2))

    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        v = self.val
        if np.any(v <= 0):
            raise ExprDomainError("log of a non-positive value")
        inv = 1.0 / v
        return self._chain(np.log(v), inv, -inv * inv)

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(c, -s, -c)

    def sqrt(self):
        v = self.val
        if np.any(v <= 0):
            raise ExprDomainError("sqrt of a non-positive value")
        r = np.sqrt(v)
        return self._chain(r, 0.5 / r, -0.25 / (r * v))


def _const_jet(value, shape, n, order):
    val = np.full(shape, float(value))
    grad = np.zeros((n,) + shape)
    hess = np.zeros((n, n) + shape) if order >= 2 else None
    return Jet(val, grad, hess)


def _is_const(node: Node) -> bool:
    if isinstance(node, Const):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Unary):
        return _is_const(node.arg)
    return _is_const(node.left) and _is_const(node.right)


def _const_value(node: Node) -> float:
    return float(_eval(node, np.zeros((0,)), 1).val)


def _eval(node: Node, x: np.ndarray, order: int) -> Jet:
    n = x.shape[0]
    shape = x.shape[1:]
    if isinstance(node, Const):
        return _const_jet(node.value, shape, n, order)
    if isinstance(node, Var):
        grad = np.zeros((n,) + shape)
        grad[node.index] = 1.0
        hess = np.zeros((n, n) + shape) if order >= 2 else None
        return Jet(np.array(x[node.index], dtype=float, copy=True), grad, hess)
    if isinstance(node, Unary):
        a = _eval(node.arg, x, order)
        if node.op == "neg":
            return -a
        return getattr(a, node.op)()
    op = node.op
    if op == "^" and _is_const(node.right):
        q = _const_value(node.right)
        a = _eval(node.left, x, order)
        if q == int(q) and abs(q) <= 64:
            return a.ipow(int(q))
        return a.fpow(q)
    a = _eval(node.left, x, order)
    b = _eval(node.right, x, order)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    # variable exponent: a^b = exp(b log a)
    return (b * a.log()).exp()


def _as_points(e: Expr, point) -> np.ndarray:
    x = np.asarray(point, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[0] != e.nvars:
        raise ValueError(f"expected {e.nvars} coordinates, got {x.shape[0]}")
    return x


def eval_jet(e: Expr, point, order: int = 2):
    """Evaluate ``e`` with exact gradient and Hessian.

    ``point`` has shape ``(n,)`` or ``(n, ...)`` for batched evaluation.
    Returns ``(value, gradient, hessian)``; hessian is ``None`` for ``order=1``.
    """
    x = _as_points(e, point)
    with np.errstate(all="ignore"):
        jet = _eval(e.root, x, order)
    if not np.all(np.isfinite(jet.val)):
        raise ExprDomainError(f"non-finite value of {e.source!r}")
    return jet.val, jet.grad, jet.hess


def eval_value(e: Expr, point):
    return eval_jet(e, point, order=1)[0]
