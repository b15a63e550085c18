"""Safe evaluation of the small arithmetic language used in scenario files.

Allowed: the variables s and t, numeric constants, + - * / and **, and the
functions max, min, exp and pow. Everything evaluates elementwise on numpy
arrays.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

from .errors import ConfigurationError

_FUNCTIONS = {
    "max": lambda *a: _fold(np.maximum, a),
    "min": lambda *a: _fold(np.minimum, a),
    "exp": np.exp,
    "pow": np.power,
}
_BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _fold(fn, args):
    if len(args) < 2:
        raise ConfigurationError("max/min need at least two arguments")
    out = args[0]
    for a in args[1:]:
        out = fn(out, a)
    return out


def _check(node: ast.AST, variables: frozenset[str], source: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, variables, source)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINARY:
            raise ConfigurationError(f"operator not allowed in {source!r}")
        _check(node.left, variables, source)
        _check(node.right, variables, source)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise ConfigurationError(f"operator not allowed in {source!r}")
        _check(node.operand, variables, source)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS or node.keywords:
            raise ConfigurationError(f"unknown function in {source!r}")
        for a in node.args:
            _check(a, variables, source)
    elif isinstance(node, ast.Name):
        if node.id not in variables:
            raise ConfigurationError(f"unknown name {node.id!r} in {source!r}")
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ConfigurationError(f"only numeric constants are allowed in {source!r}")
    else:
        raise ConfigurationError(f"unsupported syntax in {source!r}")


def _evaluate(node: ast.AST, env: dict):
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](_evaluate(node.left, env), _evaluate(node.right, env))
    if isinstance(node, ast.UnaryOp):
        value = _evaluate(node.operand, env)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.Call):
        return _FUNCTIONS[node.func.id](*(_evaluate(a, env) for a in node.args))
    if isinstance(node, ast.Name):
        return env[node.id]
    return float(node.value)


def compile_expression(source, variables=("t", "s")) -> Callable:
    """Compile an expression string (or a bare number) into f(*variables)."""
    names = tuple(variables)
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        value = float(source)
        return lambda *args: np.full(np.shape(args[-1]) if args else (), value)
    if not isinstance(source, str):
        raise ConfigurationError(f"expected an expression string or a number, got {source!r}")
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse {source!r}: {exc.msg}") from None
    _check(tree, frozenset(names), source)
    body = tree.body

    def f(*args):
        env = {n: np.asarray(a, dtype=float) for n, a in zip(names, args)}
        shape = np.shape(env[names[-1]]) if names else ()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = _evaluate(body, env)
        return np.array(np.broadcast_to(np.asarray(out, dtype=float), np.broadcast_shapes(np.shape(out), shape)))

    f.source = source
    return f
