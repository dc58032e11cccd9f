"""Recursive-descent parser for the problem-file expression language.

Grammar:

    expr    := term (('+'|'-') term)*
    term    := factor (('*'|'/') factor)*
    factor  := unary ('^' integer)?
    unary   := '-' unary | primary
    primary := number | ident | func '(' expr ')' | '(' expr ')'

Functions: sin cos exp sinh cosh sqrt abs.  Variables are x1..xn and
(optionally) t; the bare identifier ``i`` is the imaginary unit, and a
number may carry an ``i`` suffix (``3i``).  '^' is right-associative with a
constant integer exponent; unary minus binds tighter than the base of '^'.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExprSyntaxError, NonIntegerExponent, UnknownVariable

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?i?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


@dataclass(frozen=True)
class Neg:
    child: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == m.start():
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", pos)
        if m.lastgroup is None:
            pos = m.end()
            continue
        tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, dim, allow_t):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0
        self.dim = dim
        self.allow_t = allow_t

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", off)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self):
        node = self.unary()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            node = Pow(node, self.integer())
        return node

    def integer(self):
        sign = 1
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            sign = -1
            self.advance()
            kind, val, off = self.peek()
        if kind != "number" or not re.fullmatch(r"\d+", val):
            raise NonIntegerExponent(f"'^' needs a constant integer exponent, got {val!r}")
        self.advance()
        return sign * int(val)

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        kind, val, off = self.advance()
        if kind == "number":
            if val.endswith("i"):
                return Const(complex(0.0, float(val[:-1]) if val[:-1] else 1.0))
            return Const(complex(float(val)))
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            if val == "i":
                return Const(1j)
            if val == "t":
                if not self.allow_t:
                    raise UnknownVariable("variable 't' not allowed here")
                return Var("t")
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                axis = int(m.group(1))
                if not 1 <= axis <= self.dim:
                    raise UnknownVariable(f"variable {val!r} outside dimension {self.dim}")
                return Var(val)
            raise UnknownVariable(f"unknown identifier {val!r}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected token {val!r}", off)


def parse(src, dim, allow_t=False):
    """Parse an expression over variables x1..x{dim} (and t if allowed)."""
    return _Parser(src, dim, allow_t).parse()


def evaluate(node, x, t=None):
    """Evaluate a parsed tree; x is a sequence of coordinates (or arrays)."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        if node.name == "t":
            return complex(t) if np.isscalar(t) else np.asarray(t, complex)
        axis = int(node.name[1:]) - 1
        v = x[axis]
        return complex(v) if np.isscalar(v) else np.asarray(v, complex)
    if isinstance(node, Call):
        return FUNCTIONS[node.fn](evaluate(node.arg, x, t))
    if isinstance(node, Neg):
        return -evaluate(node.child, x, t)
    if isinstance(node, Pow):
        return evaluate(node.base, x, t) ** node.exponent
    if isinstance(node, BinOp):
        a = evaluate(node.left, x, t)
        b = evaluate(node.right, x, t)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    raise TypeError(f"not an expression node: {node!r}")


def pretty(node):
    """Deterministic text form; parse(pretty(parse(s))) is a fixpoint."""
    if isinstance(node, Const):
        v = node.value
        if v.imag == 0:
            return _num(v.real)
        if v.real == 0:
            return f"{_num(v.imag)}i" if v.imag >= 0 else f"(-{_num(-v.imag)}i)"
        raise ValueError("general complex constants are spelled a+bi in source")
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({pretty(node.arg)})"
    if isinstance(node, Neg):
        # unary minus binds tighter than '^', so a Pow child needs parens
        inner = pretty(node.child)
        if isinstance(node.child, Pow):
            inner = f"({inner})"
        return f"(-{inner})"
    if isinstance(node, Pow):
        return f"({pretty(node.base)})^{node.exponent}"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)}{node.op}{pretty(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")


def _num(v):
    return repr(float(v))
