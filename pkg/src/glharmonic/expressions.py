"""A small arithmetic expression grammar for scenario files.

Supported: + - * /, unary minus, parentheses, exp, ln (alias log), sin,
cos, abs, dot(u, v) on declared vector names, numeric literals, pi and e,
and declared variable names.  Nothing else parses: scenario files cannot
execute code.
"""

from __future__ import annotations

import ast
from typing import Mapping, Sequence

import numpy as np

FUNCTIONS = {
    "exp": np.exp,
    "ln": np.log,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
}

CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}


class ExpressionError(ValueError):
    """The expression uses something outside the grammar."""


class Expression:
    """A compiled scenario expression over named scalar/vector variables."""

    def __init__(self, source: str, scalars: Sequence[str], vectors: Sequence[str] = ()):
        self.source = source
        self.scalars = tuple(scalars)
        self.vectors = tuple(vectors)
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._root = tree.body
        self._check(self._root, vector_ok=False)

    def _check(self, node: ast.AST, vector_ok: bool) -> None:
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left, False)
            self._check(node.right, False)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand, False)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.keywords:
                raise ExpressionError(f"bad function call in {self.source!r}")
            name = node.func.id
            if name == "dot":
                if len(node.args) != 2:
                    raise ExpressionError("dot takes exactly two vector names")
                for arg in node.args:
                    self._check(arg, vector_ok=True)
                    if not (isinstance(arg, ast.Name) and arg.id in self.vectors):
                        raise ExpressionError(
                            f"dot arguments must be declared vectors {self.vectors}, "
                            f"got {ast.dump(arg)}")
            elif name in FUNCTIONS:
                if len(node.args) != 1:
                    raise ExpressionError(f"{name} takes exactly one argument")
                self._check(node.args[0], False)
            else:
                raise ExpressionError(
                    f"unknown function {name!r}; allowed: {sorted(FUNCTIONS)} and dot")
        elif isinstance(node, ast.Name):
            if node.id in self.vectors:
                if not vector_ok:
                    raise ExpressionError(
                        f"vector {node.id!r} can only appear inside dot(...)")
            elif node.id not in self.scalars and node.id not in CONSTANTS:
                raise ExpressionError(
                    f"unknown name {node.id!r}; scalars: {sorted(self.scalars)}, "
                    f"vectors: {sorted(self.vectors)}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ExpressionError(f"literal {node.value!r} is not a number")
        else:
            raise ExpressionError(
                f"construct {type(node).__name__} is outside the expression grammar")

    def __call__(self, env: Mapping[str, np.ndarray]) -> np.ndarray:
        return self._eval(self._root, env)

    def _eval(self, node: ast.AST, env: Mapping[str, np.ndarray]):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env),
                                          self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            val = self._eval(node.operand, env)
            return -val if isinstance(node.op, ast.USub) else +val
        if isinstance(node, ast.Call):
            name = node.func.id
            if name == "dot":
                u = env[node.args[0].id]
                v = env[node.args[1].id]
                return np.einsum("...k,...k->...", np.asarray(u, float), np.asarray(v, float))
            return FUNCTIONS[name](self._eval(node.args[0], env))
        if isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return CONSTANTS[node.id]
            return env[node.id]
        if isinstance(node, ast.Constant):
            return float(node.value)
        raise AssertionError("unreachable: node was validated")


def component_env(prefix: str, values: np.ndarray) -> dict:
    """Name the components of a stacked coordinate array: prefix1, prefix2, ..."""
    return {f"{prefix}{k + 1}": values[..., k] for k in range(values.shape[-1])}
