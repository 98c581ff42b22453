"""
指数1の鞍点における M = Hess f + ᵗJac ℓ の固有構造
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.exceptions import OrthoViolationError, PreconditionError
from ..fields import VectorField
from .critical_points import CriticalPoint

logger = logging.getLogger(__name__)


@dataclass
class SaddleData:
    """鞍点データ (μ(z), ξ(z))"""
    hessian: np.ndarray
    lmat: np.ndarray           # Jac ℓ(z)
    M: np.ndarray              # H + ᵗLmat
    mu: float                  # M の唯一の負の固有値
    xi: np.ndarray             # μ に対する単位固有ベクトル
    lambda_neg: float          # Hess f(z) の負の固有値
    base: Optional[CriticalPoint] = None

    @property
    def location(self) -> Optional[np.ndarray]:
        return None if self.base is None else self.base.location

    def to_dict(self) -> dict:
        return {
            'location': None if self.base is None else self.base.location.tolist(),
            'mu': self.mu,
            'xi': self.xi.tolist(),
            'lambda_neg': self.lambda_neg,
            'det_hessian': float(np.linalg.det(self.hessian))
        }


@dataclass
class SaddleInvariants:
    """鞍点データの不変量の検査結果"""
    negative_count: int
    mu_real_negative: bool
    k_positive_definite: bool
    det_relative_error: float
    mu_dominates: bool
    equality: bool             # |μ| = |λ|
    transpose_vanishes: bool   # |ᵗLmat ξ| ≤ 1e-8
    det_rel_tol: float = 1e-8

    @property
    def equality_characterized(self) -> bool:
        return self.equality == self.transpose_vanishes

    @property
    def all_pass(self) -> bool:
        return (self.negative_count == 1 and self.mu_real_negative and self.k_positive_definite
                and self.det_relative_error <= self.det_rel_tol and self.mu_dominates
                and self.equality_characterized)


def saddle_from_matrices(H: np.ndarray, lmat: np.ndarray,
                         base: Optional[CriticalPoint] = None) -> SaddleData:
    """
    ヘッセ行列とヤコビ行列から鞍点データを求める

    Args:
        H: Hess f(z)（対称、符号数 (d−1, 1)）
        lmat: Jac ℓ(z)
        base: 元の臨界点（任意）

    Returns:
        SaddleData

    Raises:
        OrthoViolationError: 負の実部をもつ固有値がちょうど1個でない
    """
    H = np.asarray(H, dtype=float)
    lmat = np.asarray(lmat, dtype=float)
    M = H + lmat.T
    eigenvalues = np.linalg.eigvals(M)
    negative = np.flatnonzero(eigenvalues.real < 0.0)
    if len(negative) != 1:
        raise OrthoViolationError(
            f"Saddle matrix has {len(negative)} eigenvalue(s) with negative real part, expected 1",
            f"eigenvalues={eigenvalues.tolist()}"
        )
    mu_complex = eigenvalues[negative[0]]
    if abs(mu_complex.imag) > 1e-10 * abs(mu_complex):
        raise OrthoViolationError(f"Negative eigenvalue of the saddle matrix is not real: {mu_complex}")
    mu = float(mu_complex.real)

    # M − μI の零空間を右特異ベクトルで取る
    _, _, vt = np.linalg.svd(M - mu * np.eye(len(M)))
    xi = vt[-1]
    xi = xi / np.linalg.norm(xi)
    if xi[np.argmax(np.abs(xi))] < 0:
        xi = -xi

    lambda_neg = float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])
    return SaddleData(hessian=H, lmat=lmat, M=M, mu=mu, xi=xi, lambda_neg=lambda_neg, base=base)


def saddle_analysis(z: CriticalPoint, ell: VectorField) -> SaddleData:
    """指数1の臨界点で鞍点データを求める"""
    if z.morse_index != 1:
        raise PreconditionError(f"saddle_analysis requires Morse index 1, got {z.morse_index}")
    lmat = ell.jacobian(z.location)
    data = saddle_from_matrices(z.hessian, lmat, base=z)
    logger.debug(f"Saddle at {z.location.tolist()}: mu={data.mu:.12g}, xi={data.xi.tolist()}")
    return data


def check_saddle_invariants(data: SaddleData, rel: float = 1e-8) -> SaddleInvariants:
    """
    鞍点データの4つの不変量を検査する

    1. 負の実部をもつ固有値がちょうど1個
    2. μ は実数で負
    3. K = H + 2|μ|ξξᵀ は正定値で det K = −det H
    4. |μ| ≥ |λ|、等号は ᵗLmat ξ = 0 のときに限る
    """
    H = data.hessian
    negative_count = int(np.sum(np.linalg.eigvals(data.M).real < 0.0))
    K = H + 2.0 * abs(data.mu) * np.outer(data.xi, data.xi)
    k_eigs = np.linalg.eigvalsh(0.5 * (K + K.T))
    det_h = float(np.linalg.det(H))
    det_k = float(np.linalg.det(K))
    det_error = abs(det_k + det_h) / max(abs(det_h), np.finfo(float).tiny)

    gap = abs(data.mu) - abs(data.lambda_neg)
    equality = abs(gap) <= rel * abs(data.lambda_neg)
    transpose_vanishes = float(np.linalg.norm(data.lmat.T @ data.xi)) <= 1e-8
    return SaddleInvariants(
        negative_count=negative_count,
        mu_real_negative=data.mu < 0.0,
        k_positive_definite=bool(k_eigs[0] > 0.0),
        det_relative_error=det_error,
        mu_dominates=gap >= -1e-10,
        equality=bool(equality),
        transpose_vanishes=transpose_vanishes,
        det_rel_tol=rel
    )
