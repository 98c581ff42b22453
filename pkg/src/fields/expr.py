"""
式の抽象構文木

ノードはすべて不変（frozen dataclass）で、構造的等価性で比較できる。
変数インデックスは内部では0始まり、表示では x1, x2, ... となる。
"""

import math
from dataclasses import dataclass
from typing import Optional

UNARY_FUNCTIONS = ('sin', 'cos', 'exp', 'tanh')
UNARY_OPS = ('neg',) + UNARY_FUNCTIONS
BINARY_OPS = ('add', 'sub', 'mul', 'div')

# 表示用の優先順位
PREC_ADD = 1
PREC_MUL = 2
PREC_POW = 3
PREC_BASE = 4

BINARY_SYMBOLS = {'add': '+', 'sub': '-', 'mul': '*', 'div': '/'}


class Expr:
    """式ノードの基底"""

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Const(Expr):
    """定数（name='pi' の場合は名前付き定数）"""
    value: float
    name: Optional[str] = None


@dataclass(frozen=True)
class Var(Expr):
    """変数 x_{index+1}"""
    index: int


@dataclass(frozen=True)
class Unary(Expr):
    """単項演算（符号反転または関数適用）"""
    op: str
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    """二項演算"""
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Power(Expr):
    """非負整数べき"""
    base: Expr
    exponent: int


PI = Const(math.pi, 'pi')
ZERO = Const(0.0)
ONE = Const(1.0)


def is_const(e: Expr, value: Optional[float] = None) -> bool:
    """定数ノードか（valueを指定した場合はその値か）"""
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


def max_variable_index(e: Expr) -> int:
    """式に現れる変数インデックスの最大値（変数がなければ -1）"""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Unary):
        return max_variable_index(e.arg)
    if isinstance(e, Binary):
        return max(max_variable_index(e.left), max_variable_index(e.right))
    if isinstance(e, Power):
        return max_variable_index(e.base)
    return -1


def _format_number(value: float) -> str:
    if not math.isfinite(value):
        return repr(float(value))
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _precedence(e: Expr) -> int:
    if isinstance(e, Binary):
        return PREC_ADD if e.op in ('add', 'sub') else PREC_MUL
    if isinstance(e, Power):
        return PREC_POW
    return PREC_BASE


def _wrap(e: Expr, minimum: int) -> str:
    text = to_source(e)
    return f"({text})" if _precedence(e) < minimum else text


def to_source(e: Expr) -> str:
    """
    文法に従う文字列へ変換する

    括弧は優先順位に基づいて必要な箇所にだけ付けるため、
    出力を再び parse すると構造的に等しい木が得られる。
    """
    if isinstance(e, Const):
        if e.name is not None:
            return e.name
        return _format_number(e.value)
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Unary):
        if e.op == 'neg':
            return f"-{_wrap(e.arg, PREC_BASE)}"
        return f"{e.op}({to_source(e.arg)})"
    if isinstance(e, Binary):
        symbol = BINARY_SYMBOLS[e.op]
        if e.op in ('add', 'sub'):
            return f"{_wrap(e.left, PREC_ADD)} {symbol} {_wrap(e.right, PREC_MUL)}"
        return f"{_wrap(e.left, PREC_MUL)}{symbol}{_wrap(e.right, PREC_POW)}"
    if isinstance(e, Power):
        return f"{_wrap(e.base, PREC_BASE)}^{e.exponent}"
    raise TypeError(f"Not an expression node: {e!r}")
