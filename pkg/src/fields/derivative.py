"""
記号微分と軽量簡約

簡約は定数畳み込みと 0/1 の吸収だけを行い、正準化はしない。
名前付き定数（pi）は畳み込まずに残す。
"""

import math

from .expr import Binary, Const, Expr, ONE, Power, Unary, Var, ZERO, is_const


def _plain(e: Expr) -> bool:
    """無名の数値定数か"""
    return isinstance(e, Const) and e.name is None


def _folded(value: float):
    """有限なら畳み込んだ定数、そうでなければ None"""
    return Const(float(value)) if math.isfinite(value) else None


def neg(a: Expr) -> Expr:
    if isinstance(a, Unary) and a.op == 'neg':
        return a.arg
    if _plain(a):
        return Const(-a.value)
    return Unary('neg', a)


def add(a: Expr, b: Expr) -> Expr:
    if is_const(a, 0.0):
        return b
    if is_const(b, 0.0):
        return a
    if _plain(a) and _plain(b):
        folded = _folded(a.value + b.value)
        if folded is not None:
            return folded
    if isinstance(b, Unary) and b.op == 'neg':
        return Binary('sub', a, b.arg)
    return Binary('add', a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if is_const(b, 0.0):
        return a
    if is_const(a, 0.0):
        return neg(b)
    if _plain(a) and _plain(b):
        folded = _folded(a.value - b.value)
        if folded is not None:
            return folded
    return Binary('sub', a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if is_const(a, 0.0) or is_const(b, 0.0):
        return ZERO
    if is_const(a, 1.0):
        return b
    if is_const(b, 1.0):
        return a
    if is_const(a, -1.0):
        return neg(b)
    if is_const(b, -1.0):
        return neg(a)
    if _plain(a) and _plain(b):
        folded = _folded(a.value * b.value)
        if folded is not None:
            return folded
    if isinstance(a, Unary) and a.op == 'neg':
        return neg(mul(a.arg, b))
    if isinstance(b, Unary) and b.op == 'neg':
        return neg(mul(a, b.arg))
    return Binary('mul', a, b)


def div(a: Expr, b: Expr) -> Expr:
    if is_const(b, 1.0):
        return a
    if is_const(a, 0.0) and not is_const(b, 0.0):
        return ZERO
    if _plain(a) and _plain(b) and b.value != 0.0:
        folded = _folded(a.value / b.value)
        if folded is not None:
            return folded
    return Binary('div', a, b)


def power(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if _plain(base):
        try:
            folded = _folded(base.value ** exponent)
        except OverflowError:
            folded = None
        if folded is not None:
            return folded
    return Power(base, exponent)


def apply(op: str, arg: Expr) -> Expr:
    """単項関数の適用（無名定数は評価して畳み込む）"""
    if op == 'neg':
        return neg(arg)
    if _plain(arg):
        folded = _folded(getattr(math, op)(arg.value)) if op != 'exp' or arg.value < 700 else None
        if folded is not None:
            return folded
    return Unary(op, arg)


_BINARY_BUILDERS = {'add': add, 'sub': sub, 'mul': mul, 'div': div}


def simplify(e: Expr) -> Expr:
    """木を葉から組み立て直して軽量簡約を適用する"""
    if isinstance(e, Unary):
        return apply(e.op, simplify(e.arg))
    if isinstance(e, Binary):
        return _BINARY_BUILDERS[e.op](simplify(e.left), simplify(e.right))
    if isinstance(e, Power):
        return power(simplify(e.base), e.exponent)
    return e


def differentiate(e: Expr, i: int) -> Expr:
    """
    変数 x_{i+1} についての偏導関数

    Args:
        e: 式
        i: 0始まりの変数インデックス

    Returns:
        簡約済みの導関数
    """
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == i else ZERO
    if isinstance(e, Unary):
        da = differentiate(e.arg, i)
        if is_const(da, 0.0):
            return ZERO
        a = e.arg
        if e.op == 'neg':
            return neg(da)
        if e.op == 'sin':
            return mul(da, apply('cos', a))
        if e.op == 'cos':
            return neg(mul(da, apply('sin', a)))
        if e.op == 'exp':
            return mul(da, apply('exp', a))
        if e.op == 'tanh':
            return mul(da, sub(ONE, power(apply('tanh', a), 2)))
        raise ValueError(f"Unknown unary operator: {e.op}")
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da = differentiate(a, i)
        db = differentiate(b, i)
        if e.op == 'add':
            return add(da, db)
        if e.op == 'sub':
            return sub(da, db)
        if e.op == 'mul':
            return add(mul(da, b), mul(a, db))
        if e.op == 'div':
            if is_const(db, 0.0):
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2))
        raise ValueError(f"Unknown binary operator: {e.op}")
    if isinstance(e, Power):
        n = e.exponent
        if n == 0:
            return ZERO
        db = differentiate(e.base, i)
        return mul(mul(Const(float(n)), power(e.base, n - 1)), db)
    raise TypeError(f"Not an expression node: {e!r}")
