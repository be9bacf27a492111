"""Expression trees for mass profiles: parsing, printing, evaluation, differentiation.

Grammar (whitespace insignificant)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | factor
    factor := base ("^" unary)?
    base   := number | ident | "(" expr ")" | func "(" expr ")"
    func   := exp | ln | sqrt | sin | cos

``^`` binds tightest and is right-associative, then unary minus, then
``*``/``/``, then ``+``/``-``. ``ident`` is ``x`` or a declared parameter.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCS = ("exp", "ln", "sqrt", "sin", "cos")
BINOPS = ("+", "-", "*", "/", "^")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Param, Unary, Binary]

X = Var()
ZERO = Const(0.0)
ONE = Const(1.0)


# --- tokenizer -------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()−])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        offset = len(text[:pos].encode("utf-8"))
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", offset,
                             ("number", "identifier", "operator", "("))
        kind = m.lastgroup
        val = m.group()
        if kind == "num":
            end = m.end()
            # "1e" or "1.5e+" with no digits is a malformed number, not num + ident
            if end < len(text) and text[end] in "eE" and re.match(r"[eE][+-]?(?!\d)", text[end:]):
                raise ParseError(f"malformed number {text[pos:end + 1]!r}", offset)
            if end < len(text) and (text[end].isalpha() or text[end] == "."):
                raise ParseError(f"malformed number {text[pos:end + 1]!r}", offset)
        if kind != "ws":
            tokens.append((kind, "-" if val == "−" else val, offset))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, params: Mapping[str, float]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.params = params

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, val: str):
        kind, v, off = self.take()
        if v != val or kind == "end":
            raise ParseError(f"unexpected {v or 'end of input'!r}", off, (val,))

    def parse(self) -> Node:
        node = self.expr()
        kind, v, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {v!r}", off, ("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            arg = self.unary()
            # a signed literal is a constant, so printed negatives reparse identically
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Unary("neg", arg)
        return self.factor()

    def factor(self) -> Node:
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def base(self) -> Node:
        kind, val, off = self.take()
        if kind == "num":
            try:
                return Const(float(val))
            except ValueError:
                raise ParseError(f"malformed number {val!r}", off) from None
        if kind == "ident":
            if val in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            if val == "x":
                return X
            if val in self.params:
                return Param(val)
            raise ParseError(f"unknown identifier {val!r}", off, ("x", *self.params, *FUNCS))
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", off,
                         ("number", "identifier", "(", "-"))


def parse_mass(text: str, params: Mapping[str, float] | None = None) -> Node:
    """Parse ``text`` into an expression tree; identifiers must be x or keys of params."""
    return _Parser(text, dict(params or {})).parse()


# --- printing --------------------------------------------------------------

def render(node: Node) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{render(node.arg)})"
        return f"{node.op}({render(node.arg)})"
    return f"({render(node.left)} {node.op} {render(node.right)})"


# --- evaluation ------------------------------------------------------------

_UNARY_EVAL = {
    "neg": np.negative,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
}


def evaluate(node: Node, x, params: Mapping[str, float] | None = None):
    """Evaluate on a scalar or array ``x``; numpy semantics for invalid values."""
    params = params or {}
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        return _eval(node, x, params)


def _eval(node, x, params):
    if isinstance(node, Const):
        return np.full_like(x, node.value)
    if isinstance(node, Var):
        return x.copy()
    if isinstance(node, Param):
        return np.full_like(x, params[node.name])
    if isinstance(node, Unary):
        return _UNARY_EVAL[node.op](_eval(node.arg, x, params))
    a = _eval(node.left, x, params)
    b = _eval(node.right, x, params)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


# --- differentiation -------------------------------------------------------

def _c(v: float) -> Const:
    return Const(float(v))


def add(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return _c(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Binary("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return _c(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return Binary("-", a, b)


def mul(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return _c(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Binary("*", a, b)


def div(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return _c(a.value / b.value)
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Binary("/", a, b)


def power(a: Node, b: Node) -> Node:
    if b == ZERO:
        return ONE
    if b == ONE:
        return a
    return Binary("^", a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Const):
        return _c(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def differentiate(node: Node) -> Node:
    """Exact derivative with respect to x, with light constant folding."""
    if isinstance(node, (Const, Param)):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Unary):
        u, du = node.arg, differentiate(node.arg)
        if du == ZERO:
            return ZERO
        if node.op == "neg":
            return neg(du)
        if node.op == "exp":
            return mul(node, du)
        if node.op == "ln":
            return div(du, u)
        if node.op == "sqrt":
            return div(du, mul(_c(2.0), node))
        if node.op == "sin":
            return mul(Unary("cos", u), du)
        if node.op == "cos":
            return neg(mul(Unary("sin", u), du))
        raise ValueError(f"unknown function {node.op}")
    a, b = node.left, node.right
    da, db = differentiate(a), differentiate(b)
    if node.op == "+":
        return add(da, db)
    if node.op == "-":
        return sub(da, db)
    if node.op == "*":
        return add(mul(da, b), mul(a, db))
    if node.op == "/":
        return div(sub(mul(da, b), mul(a, db)), power(b, _c(2.0)))
    # a ^ b
    if db == ZERO:
        if isinstance(b, Const):
            lowered = power(a, _c(b.value - 1.0))
        else:
            lowered = power(a, sub(b, ONE))
        return mul(mul(b, lowered), da)
    # general exponent: a^b * (b' ln a + b a'/a)
    return mul(node, add(mul(db, Unary("ln", a)), div(mul(b, da), a)))


def free_params(node: Node) -> set[str]:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Unary):
        return free_params(node.arg)
    if isinstance(node, Binary):
        return free_params(node.left) | free_params(node.right)
    return set()
