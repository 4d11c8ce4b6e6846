"""Arithmetic expressions over (t, x, y, u) for custom scenarios.

Grammar: numbers, the variables ``t x y u``, the constants ``pi`` and ``e``,
``+ - * / **`` (``^`` is accepted as power), parentheses and the functions
``sin cos exp tanh``. Anything else is rejected before sympy sees the string.
"""
from __future__ import annotations

import ast

import numpy as np
import sympy

VARIABLES = ("t", "x", "y", "u")
FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp, "tanh": sympy.tanh}
CONSTANTS = {"pi": sympy.pi, "e": sympy.E}

_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Constant,
                  ast.Load, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)

_SYMBOLS = {name: sympy.Symbol(name, real=True) for name in VARIABLES}


class ExpressionError(ValueError):
    pass


def parse(text: str) -> sympy.Expr:
    text = str(text).replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as err:
        raise ExpressionError(f"cannot parse {text!r}: {err.msg}") from err
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ExpressionError(f"{type(node).__name__} not allowed in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric literal in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords or len(node.args) != 1:
                raise ExpressionError(f"unsupported call in {text!r}")
        if isinstance(node, ast.Name) and node.id not in VARIABLES and node.id not in FUNCTIONS and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
    return sympy.sympify(text, locals={**_SYMBOLS, **FUNCTIONS, **CONSTANTS})


def compile_expr(expr: sympy.Expr, args=("t", "x", "y")):
    """Vectorised numpy callable of ``args``; constants broadcast to the input shape."""
    fn = sympy.lambdify([_SYMBOLS[a] for a in args], expr, modules="numpy")

    def wrapped(*vals):
        out = fn(*vals)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(*vals).shape)

    return wrapped


def nonlinearity(text: str):
    """(q, q_u, q_uu) callables of (t, x, y, u) for the expression ``text``."""
    q = parse(text)
    u = _SYMBOLS["u"]
    args = ("t", "x", "y", "u")
    return compile_expr(q, args), compile_expr(sympy.diff(q, u), args), compile_expr(sympy.diff(q, u, 2), args)


def function_of(text: str, args=("t", "x", "y")):
    expr = parse(text)
    extra = expr.free_symbols - {_SYMBOLS[a] for a in args}
    if extra:
        raise ExpressionError(f"{text!r} uses {sorted(map(str, extra))}, only {args} allowed here")
    return compile_expr(expr, args)
