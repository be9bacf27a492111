"""Shared fixtures for the parser and acceptance tests."""
import random

import numpy as np

from qespdm.expr import FUNCS, Binary, Const, Param, Unary, Var

PARAMS = {"a": 2.0, "c": 1.5, "m0": 0.7}

ROUND_TRIP = [
    "1",
    "x",
    "-x",
    "2.5",
    "1e-3",
    "3.25E+2",
    ".5",
    "a",
    "x + 1",
    "x - 1",
    "x * x",
    "x / 2",
    "x ^ 2",
    "x^2^3",
    "-x^2",
    "(-x)^2",
    "2 - -x",
    "a*x^2 + c",
    "((a + x^2)/(1 + x^2))^2",
    "c*x^2",
    "m0",
    "exp(-x^2)",
    "ln(1 + x^2)",
    "sqrt(a + x^2)",
    "sin(x) + cos(x)",
    "exp(sin(x)) * cos(ln(2 + x))",
    "1/(1 + exp(-x))",
    "x^0.5",
    "x^(-1.5)",
    "x^a",
    "a^x",
    "(1 + x)^(1 + x)",
    "1 - x + x^2 - x^3",
    "((((x))))",
    "x*x*x/x/x",
    "1 - (2 - (3 - x))",
    "2^-x",
    "-(-(-x))",
    "−x + 3",
    "sqrt(sqrt(x^2 + 1))",
    "exp(ln(x^2 + 1))",
    "a*exp(-c*x^2) + m0",
    "(x + a)*(x - a)/(c + x^2)",
    "cos(x)^2 + sin(x)^2",
    "1 + 0.25*x",
    "3*x^4 - 2*x^3 + x^2 - 7",
    "m0*(1 + a*x^2)^(-1)",
    "exp(-x)*(1 + x)^2",
    "ln(a)*x",
    "sqrt(1 + (a*x)^2)/(1 + x^2)",
]


def random_expr(rng: random.Random, depth: int = 3):
    """A random tree that is usually finite on [0.5, 2]."""
    if depth == 0 or rng.random() < 0.25:
        pick = rng.random()
        if pick < 0.5:
            return Var()
        if pick < 0.75:
            return Const(round(rng.uniform(0.2, 3.0), 3))
        return Param(rng.choice(sorted(PARAMS)))
    kind = rng.random()
    if kind < 0.3:
        op = rng.choice(FUNCS + ("neg",))
        arg = random_expr(rng, depth - 1)
        if op in ("ln", "sqrt"):
            # keep the argument positive
            arg = Binary("+", Binary("^", arg, Const(2.0)), Const(1.0))
        return Unary(op, arg)
    op = rng.choice(["+", "-", "*", "/", "^"])
    left, right = random_expr(rng, depth - 1), random_expr(rng, depth - 1)
    if op == "/":
        right = Binary("+", Binary("^", right, Const(2.0)), Const(0.5))
    if op == "^":
        left = Binary("+", Binary("^", left, Const(2.0)), Const(0.5))
        right = Const(round(rng.uniform(-2.0, 3.0), 2))
    return Binary(op, left, right)


def _has_x(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Unary):
        return _has_x(node.arg)
    if isinstance(node, Binary):
        return _has_x(node.left) or _has_x(node.right)
    return False


def random_exprs(count: int = 20, seed: int = 20240611):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        e = random_expr(rng)
        if not isinstance(e, (Var, Const, Param)) and _has_x(e):
            out.append(e)
    return out


PROBE = np.linspace(0.5, 2.0, 13)


def fd1(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


def fd2(f, x, h=1e-4):
    return (f(x + h) - 2 * f(x) + f(x - h)) / h**2


def close(value, ref, rtol, floor):
    """|value - ref| <= rtol * max(|ref|, floor)."""
    return np.abs(value - ref) <= rtol * np.maximum(np.abs(ref), floor)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
