"""
トーラス上のスカラー場・ベクトル場

ScalarField は式と記号的な勾配・ヘッセ行列を保持し、評価関数を
構築時に一度だけコンパイルする。構築後は不変で、複数スレッドから
同時に評価してよい。
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .compiler import compile_expr
from .derivative import differentiate, mul, neg, simplify
from .expr import Const, Expr, ZERO, is_const, to_source
from .parser import parse


class ScalarField:
    """記号微分可能なスカラー場"""

    def __init__(self, expr: Expr, dimension: int, period: float = 1.0):
        """
        初期化

        Args:
            expr: 式
            dimension: 次元 d
            period: 周期 L
        """
        self.expr = simplify(expr)
        self.dimension = dimension
        self.period = float(period)
        self.grad: Tuple[Expr, ...] = tuple(differentiate(self.expr, i) for i in range(dimension))
        self.hess: Tuple[Tuple[Expr, ...], ...] = tuple(
            tuple(differentiate(self.grad[i], j) for j in range(dimension)) for i in range(dimension)
        )
        self._value = compile_expr(self.expr)
        self._grad = [compile_expr(g) for g in self.grad]
        self._hess = [[compile_expr(h) for h in row] for row in self.hess]
        self._value_lenient = compile_expr(self.expr, strict=False)
        self._grad_lenient = [compile_expr(g, strict=False) for g in self.grad]

    @classmethod
    def from_source(cls, source: str, dimension: int, period: float = 1.0) -> 'ScalarField':
        """式の文字列から構築する"""
        return cls(parse(source, dimension), dimension, period)

    @property
    def source(self) -> str:
        return to_source(self.expr)

    @property
    def is_zero(self) -> bool:
        return is_const(self.expr, 0.0)

    def __repr__(self) -> str:
        return f"ScalarField({self.source!r}, d={self.dimension}, L={self.period})"

    def value(self, x, strict: bool = True) -> np.ndarray:
        """f(x)（x は形状 (..., d)）"""
        return self._value(x) if strict else self._value_lenient(x)

    __call__ = value

    def gradient(self, x, strict: bool = True) -> np.ndarray:
        """∇f(x)、形状 (..., d)"""
        kernels = self._grad if strict else self._grad_lenient
        return np.stack([k(x) for k in kernels], axis=-1)

    def hessian(self, x, symmetrize: bool = True) -> np.ndarray:
        """Hess f(x)、形状 (..., d, d)"""
        H = np.stack([np.stack([k(x) for k in row], axis=-1) for row in self._hess], axis=-2)
        if symmetrize:
            H = 0.5 * (H + np.swapaxes(H, -1, -2))
        return H

    def laplacian(self, x) -> np.ndarray:
        return sum(self._hess[i][i](x) for i in range(self.dimension))

    def hessian_asymmetry(self, x) -> np.ndarray:
        """max_{i<j} |H_ij − H_ji| / (1 + |H|)"""
        H = self.hessian(x, symmetrize=False)
        diff = np.abs(H - np.swapaxes(H, -1, -2)).max(axis=(-1, -2))
        return diff / (1.0 + np.linalg.norm(H, axis=(-1, -2)))


class VectorField:
    """ℓ を表すベクトル場

    kind は 'none'（ℓ≡0）、'rotational'（ℓ = a(−∂₂f, ∂₁f)、d=2のみ）、
    'components'（成分式を明示）のいずれか。回転形も成分の ScalarField に
    展開して保持するので、ヤコビ行列・発散は共通の記号微分で得る。
    """

    def __init__(self, components: Sequence[ScalarField], kind: str = 'components',
                 amplitude: float = 0.0):
        self.components: Tuple[ScalarField, ...] = tuple(components)
        self.kind = kind
        self.amplitude = float(amplitude)
        self.dimension = len(self.components)

    @classmethod
    def zero(cls, dimension: int, period: float = 1.0) -> 'VectorField':
        return cls([ScalarField(ZERO, dimension, period) for _ in range(dimension)], kind='none')

    @classmethod
    def rotational(cls, f: ScalarField, amplitude: float) -> 'VectorField':
        """ℓ = aJ∇f = a(−∂₂f, ∂₁f)"""
        if f.dimension != 2:
            raise ValueError("Rotational drift is defined for dimension 2 only")
        a = Const(float(amplitude))
        first = neg(mul(a, f.grad[1]))
        second = mul(a, f.grad[0])
        return cls([ScalarField(first, 2, f.period), ScalarField(second, 2, f.period)],
                   kind='rotational', amplitude=amplitude)

    @classmethod
    def from_sources(cls, sources: Sequence[str], dimension: int, period: float = 1.0) -> 'VectorField':
        if len(sources) != dimension:
            raise ValueError(f"Expected {dimension} drift components, got {len(sources)}")
        return cls([ScalarField.from_source(s, dimension, period) for s in sources])

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    @property
    def sources(self) -> List[str]:
        return [c.source for c in self.components]

    def value(self, x, strict: bool = True) -> np.ndarray:
        """ℓ(x)、形状 (..., d)"""
        return np.stack([c.value(x, strict=strict) for c in self.components], axis=-1)

    __call__ = value

    def jacobian(self, x) -> np.ndarray:
        """Jac ℓ(x)[k, j] = ∂ℓ_k/∂x_j、形状 (..., d, d)"""
        return np.stack([c.gradient(x) for c in self.components], axis=-2)

    def divergence(self, x) -> np.ndarray:
        return sum(np.asarray(c.gradient(x))[..., k] for k, c in enumerate(self.components))


class Drift:
    """ドリフト b = −(∇f + ℓ)"""

    def __init__(self, f: ScalarField, ell: Optional[VectorField] = None):
        self.f = f
        self.ell = ell if ell is not None else VectorField.zero(f.dimension, f.period)
        self.dimension = f.dimension

    def __call__(self, x, strict: bool = True) -> np.ndarray:
        grad = self.f.gradient(x, strict=strict)
        if self.ell.is_zero:
            return -grad
        return -(grad + self.ell.value(x, strict=strict))

    def jacobian(self, x) -> np.ndarray:
        """Jac b = −(Hess f + Jac ℓ)"""
        J = self.f.hessian(x)
        if not self.ell.is_zero:
            J = J + self.ell.jacobian(x)
        return -J



def finite_difference_error(field: ScalarField, points, step: float = 1e-5) -> float:
    """
    記号勾配と中心差分の最大相対誤差

    Args:
        field: 検査するスカラー場
        points: 形状 (n, d) の点
        step: 差分幅

    Returns:
        max |∇f − D_h f| / (1 + |∇f|)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    grad = field.gradient(points)
    fd = np.empty_like(grad)
    for i in range(field.dimension):
        e = np.zeros(field.dimension)
        e[i] = step
        fd[:, i] = (field.value(points + e) - field.value(points - e)) / (2.0 * step)
    err = np.linalg.norm(grad - fd, axis=-1) / (1.0 + np.linalg.norm(grad, axis=-1))
    return float(err.max())
