"""Tiny arithmetic-expression language for user-supplied spectral densities.

Grammar: numbers, the variables ``xi`` (frequency vector), ``xi1``..``xid``,
``r`` (= norm(xi)), ``pi``, ``e``; operators + - * / ^ (power, binding tighter
than unary minus) and unary minus; functions exp, abs, norm, sqrt, log.  The
vector ``xi`` may only appear as norm(c*xi).  Evaluation is vectorized with numpy.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass

import numpy as np

_FUNCS = {
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "log": np.log,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


@dataclass(frozen=True)
class DensityExpression:
    source: str
    tree: ast.Expression
    radial: bool

    def __call__(self, xi):
        """Evaluate at frequencies ``xi`` of shape (..., d)."""
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = _eval(self.tree.body, xi)
        return np.broadcast_to(np.asarray(val, dtype=float), xi.shape[:-1]).copy()

    def radial_profile(self, r):
        """Evaluate a radial expression at radii ``r`` (any shape)."""
        if not self.radial:
            raise ExpressionError("expression is not radial")
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = _eval(self.tree.body, None, r=r)
        return np.broadcast_to(np.asarray(val, dtype=float), r.shape).copy()


def parse_expression(text: str) -> DensityExpression:
    src = text.strip()
    if not src:
        raise ExpressionError("empty density expression")
    if "**" in src:
        raise ExpressionError("use '^' for powers")
    try:
        # '^' is power with the usual precedence: -r^2 = -(r^2), a*b^2 = a*(b^2)
        tree = ast.parse(src.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse density expression: {exc.msg}") from None
    radial = _check(tree.body, inside_norm=False)
    return DensityExpression(src, tree, radial)


def _check(node, inside_norm) -> bool:
    """Validate the tree; return True when it only depends on |xi|."""
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        return True
    if isinstance(node, ast.Name):
        if node.id in _CONSTS or node.id == "r":
            return True
        if node.id == "xi":
            if not inside_norm:
                raise ExpressionError("the vector xi may only appear inside norm()")
            return True
        if re.fullmatch(r"xi[1-9][0-9]*", node.id):
            return False
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _check(node.operand, inside_norm)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        a = _check(node.left, inside_norm)
        b = _check(node.right, inside_norm)
        return a and b
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        if node.keywords or len(node.args) != 1:
            raise ExpressionError(f"{name}() takes exactly one argument")
        if name == "norm":
            if not _scalar_multiple_of_xi(node.args[0]):
                raise ExpressionError("norm() takes xi times a constant, e.g. norm(2*xi)")
            return _check(node.args[0], inside_norm=True)
        if name in _FUNCS:
            return _check(node.args[0], inside_norm)
        raise ExpressionError(f"unknown function {name!r}")
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def _mentions_xi(node) -> bool:
    return any(isinstance(n, ast.Name) and n.id.startswith("xi") for n in ast.walk(node))


def _scalar_multiple_of_xi(node) -> bool:
    """xi, -xi, c*xi, xi*c or xi/c with c free of xi (keeps norm() rotation invariant)."""
    if isinstance(node, ast.Name):
        return node.id == "xi"
    if isinstance(node, ast.UnaryOp):
        return _scalar_multiple_of_xi(node.operand)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        return ((_scalar_multiple_of_xi(node.left) and not _mentions_xi(node.right))
                or (_scalar_multiple_of_xi(node.right) and not _mentions_xi(node.left)))
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
        return _scalar_multiple_of_xi(node.left) and not _mentions_xi(node.right)
    return False


def _eval(node, xi, r=None):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        if node.id == "r":
            return r if r is not None else np.linalg.norm(xi, axis=-1)
        if node.id == "xi":
            return xi
        k = int(node.id[2:])
        if xi is None or k > xi.shape[-1]:
            raise ExpressionError(f"{node.id} exceeds the dimension")
        return xi[..., k - 1]
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, xi, r)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, xi, r), _eval(node.right, xi, r))
    name = node.func.id
    if name == "norm":
        if r is not None:
            # radial mode: evaluate along the first axis, where xi = (r, 0, ..)
            return np.linalg.norm(_eval(node.args[0], np.asarray(r)[..., None], r), axis=-1)
        return np.linalg.norm(_eval(node.args[0], xi, r), axis=-1)
    return _FUNCS[name](_eval(node.args[0], xi, r))
