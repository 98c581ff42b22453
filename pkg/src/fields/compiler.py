"""
式のコンパイラ

ASTを numpy クロージャへ変換する。コンパイル後の関数は形状 (..., d) の
点配列を受け取り、形状 (...) の配列を返す。

strict=True では除数がゼロになる点があれば EvaluationFault を送出し、
strict=False では IEEE の規則どおり inf/nan をそのまま返す（MCのパス汚染検出用）。
"""

from typing import Callable

import numpy as np

from ..core.exceptions import EvaluationFault
from .expr import Binary, Const, Expr, Power, Unary, Var, to_source

Kernel = Callable[[np.ndarray], np.ndarray]

_UFUNCS = {
    'sin': np.sin,
    'cos': np.cos,
    'exp': np.exp,
    'tanh': np.tanh,
    'neg': np.negative,
}


def _build(e: Expr, strict: bool) -> Kernel:
    if isinstance(e, Const):
        value = e.value
        return lambda x: value
    if isinstance(e, Var):
        index = e.index
        return lambda x: x[..., index]
    if isinstance(e, Unary):
        ufunc = _UFUNCS[e.op]
        arg = _build(e.arg, strict)
        return lambda x: ufunc(arg(x))
    if isinstance(e, Power):
        base = _build(e.base, strict)
        n = e.exponent
        if n == 0:
            return lambda x: 1.0
        return lambda x: base(x) ** n
    if isinstance(e, Binary):
        left = _build(e.left, strict)
        right = _build(e.right, strict)
        if e.op == 'add':
            return lambda x: left(x) + right(x)
        if e.op == 'sub':
            return lambda x: left(x) - right(x)
        if e.op == 'mul':
            return lambda x: left(x) * right(x)
        if not strict:
            return lambda x: left(x) / right(x)
        source = to_source(e)

        def checked_div(x):
            divisor = right(x)
            if np.any(np.asarray(divisor) == 0.0):
                raise EvaluationFault("Division by zero", source)
            return left(x) / divisor
        return checked_div
    raise TypeError(f"Not an expression node: {e!r}")


def compile_expr(e: Expr, strict: bool = True) -> Kernel:
    """
    式を評価関数へコンパイルする

    Args:
        e: 式
        strict: ゼロ除算を EvaluationFault にするか

    Returns:
        (..., d) -> (...) の評価関数
    """
    kernel = _build(e, strict)

    def evaluate_points(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            out = kernel(x)
        return np.array(np.broadcast_to(out, x.shape[:-1]), dtype=float)

    return evaluate_points


def evaluate(e: Expr, x) -> float:
    """1点で式を評価する"""
    return float(compile_expr(e)(np.asarray(x, dtype=float)))
