"""
主固有値と小さい固有値の個数
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from ..core.exceptions import ConvergenceError, FactorizationError, PreconditionError
from .grid import GridOperator

logger = logging.getLogger(__name__)

POWER_TOL = 1e-12
MAX_POWER_ITERATIONS = 10 ** 4
RESIDUAL_REL = 1e-8
# 丸め誤差の許容は eps·‖A‖_∞ のこの倍数
ROUNDOFF_FACTOR = 1e3
DENSE_LIMIT = 400
FALLBACK_THRESHOLD_FACTOR = 0.1


@dataclass
class SpectralResult:
    """主固有対"""
    eigenvalue: complex
    vector: np.ndarray
    residual: float
    iterations: int
    negativity_fraction: float
    method: str
    operator: Optional[GridOperator] = None
    scale: float = 0.0          # ‖A‖_∞

    @property
    def value(self) -> float:
        return float(np.real(self.eigenvalue))

    @property
    def imag_ratio(self) -> float:
        return abs(np.imag(self.eigenvalue)) / max(abs(self.eigenvalue), np.finfo(float).tiny)

    @property
    def invariants_hold(self) -> bool:
        return bool(self.imag_ratio <= 1e-8 and self.value > 0.0 and self.negativity_fraction <= 1e-6
                    and self.residual <= self.residual_tolerance)

    @property
    def residual_tolerance(self) -> float:
        return RESIDUAL_REL * abs(self.eigenvalue) + ROUNDOFF_FACTOR * np.finfo(float).eps * self.scale

    def to_dict(self) -> dict:
        result = {
            'eigenvalue': self.value,
            'imag': float(np.imag(self.eigenvalue)),
            'residual': self.residual,
            'iterations': self.iterations,
            'negativity_fraction': self.negativity_fraction,
            'method': self.method,
            'invariants_hold': self.invariants_hold
        }
        if self.operator is not None:
            result['operator'] = self.operator.to_dict()
        return result


def _normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    if np.real(v.sum()) < 0.0:
        v = -v
    return v


def _negativity(v: np.ndarray) -> float:
    re = np.real(v)
    return float(np.count_nonzero(re < -1e-12 * np.abs(re).max())) / len(re)


def _power(A, tol: float, max_iter: int):
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as e:
        raise FactorizationError("Sparse LU factorization failed (singular operator?)", str(e))

    v = np.full(A.shape[0], 1.0 / np.sqrt(A.shape[0]))
    lam_prev = np.inf
    for iteration in range(1, max_iter + 1):
        w = lu.solve(v)
        if not np.all(np.isfinite(w)):
            raise FactorizationError("Sparse LU solve produced non-finite values")
        lam = 1.0 / float(v @ w)
        v = _normalize(w)
        if abs(lam - lam_prev) <= tol * abs(lam):
            return v, lam, iteration
        lam_prev = lam
    raise ConvergenceError(f"Inverse power iteration did not converge in {max_iter} iterations")


def principal_eig(operator: GridOperator, method: str = 'power', tol: float = POWER_TOL,
                  max_iter: int = MAX_POWER_ITERATIONS) -> SpectralResult:
    """
    主固有値（実部最小の固有値）と固有ベクトル

    Args:
        operator: 格子作用素
        method: 'power'（シフト 0 の逆べき乗法）または 'arnoldi'（scipy eigs, sigma=0）
        tol: 固有値の相対変化の収束判定
        max_iter: 最大反復回数

    Returns:
        SpectralResult

    Raises:
        FactorizationError: LU 分解の失敗
        ConvergenceError: 反復が収束しない
    """
    A = operator.matrix
    if method == 'power':
        v, lam, iterations = _power(A, tol, max_iter)
        Av = A @ v
        eigenvalue: complex = complex(lam)
    elif method == 'arnoldi':
        try:
            values, vectors = spla.eigs(A.tocsc(), k=1, sigma=0.0, which='LM',
                                        v0=np.ones(A.shape[0]), maxiter=max_iter)
        except spla.ArpackNoConvergence as e:
            raise ConvergenceError("Arnoldi iteration did not converge", str(e))
        except RuntimeError as e:
            raise FactorizationError("Shift-invert factorization failed", str(e))
        eigenvalue = complex(values[0])
        v = vectors[:, 0]
        # 位相をそろえて実ベクトルに近づける
        v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
        v = _normalize(v.real if np.abs(v.imag).max() <= 1e-10 else v)
        Av = A @ v
        iterations = 0
    else:
        raise PreconditionError(f"Unknown eigen method {method!r}; expected 'power' or 'arnoldi'")

    residual = float(np.linalg.norm(Av - eigenvalue * v))
    result = SpectralResult(eigenvalue=eigenvalue, vector=v, residual=residual, iterations=iterations,
                            negativity_fraction=_negativity(v), method=method, operator=operator,
                            scale=float(abs(A).sum(axis=1).max()))
    if not result.invariants_hold:
        logger.warning(f"Principal eigenpair of {operator.tag} violates an invariant: "
                       f"lambda={eigenvalue:.6g}, residual={residual:.3e}, "
                       f"negativity={result.negativity_fraction:.2e}")
    logger.info(f"Principal eigenvalue of {operator.tag} at h={operator.h}: {result.value:.10g} "
                f"({method}, {iterations} iterations)")
    return result


@dataclass
class SmallEigenvalues:
    """閾値未満の固有値の個数"""
    count: int
    eigenvalues: List[float]
    threshold: float
    m0: Optional[int] = None
    calibration: dict = field(default_factory=dict)

    @property
    def matches(self) -> Optional[bool]:
        return None if self.m0 is None else bool(self.count == self.m0)

    def to_dict(self) -> dict:
        return {
            'count': self.count,
            'eigenvalues': self.eigenvalues,
            'threshold': self.threshold,
            'm0': self.m0,
            'matches': self.matches,
            'calibration': self.calibration
        }


def small_eig_threshold(minimum_curvatures: Sequence[float], h: float, c: Optional[float] = None) -> float:
    """
    閾値 c·h

    c の既定は内部極小点のヘッセ行列の最小正固有値の 0.1 倍。
    """
    if c is None:
        positive = [float(k) for k in minimum_curvatures if k > 0.0]
        if positive:
            c = FALLBACK_THRESHOLD_FACTOR * min(positive)
        else:
            c = FALLBACK_THRESHOLD_FACTOR
            logger.warning(f"No interior minimum curvature available; threshold falls back to c={c}")
    return c * h


def _lowest(operator: GridOperator, k: int) -> np.ndarray:
    """実部の小さい順に k 個の固有値の実部"""
    A = operator.matrix
    n = A.shape[0]
    symmetric = operator.tag == 'ReP'
    if n <= DENSE_LIMIT or k >= n - 1:
        dense = A.toarray()
        values = scipy.linalg.eigvalsh(dense) if symmetric else np.linalg.eigvals(dense).real
        return np.sort(values)[:k]
    try:
        if symmetric:
            values = spla.eigsh(A.tocsc(), k=k, sigma=0.0, which='LM', return_eigenvectors=False)
        else:
            values = spla.eigs(A.tocsc(), k=k, sigma=0.0, which='LM', return_eigenvectors=False).real
    except spla.ArpackNoConvergence as e:
        raise ConvergenceError("Shift-invert eigen solve did not converge", str(e))
    except RuntimeError as e:
        raise FactorizationError("Shift-invert factorization failed", str(e))
    return np.sort(np.real(values))


def small_eig_count(operator: GridOperator, threshold: float, m0: Optional[int] = None) -> SmallEigenvalues:
    """
    実部が threshold 未満の固有値を重複込みで数える

    ReP は対称ソルバ、P は非対称のシフト反転 Arnoldi で 0 付近の固有値を求め、
    すべてが閾値未満なら求める個数を倍にして数え直す。

    Raises:
        PreconditionError: 閾値が正でない、またはタグが ReP/P でない
    """
    if not threshold > 0.0:
        raise PreconditionError(f"Threshold must be positive, got {threshold}")
    if operator.tag not in ('ReP', 'P'):
        raise PreconditionError(f"small_eig_count requires a ReP or P operator, got {operator.tag}")
    n = operator.size
    k = min(max(4, (m0 or 0) + 2), n)
    while True:
        values = _lowest(operator, k)
        count = int(np.count_nonzero(values < threshold))
        if count < len(values) or k >= n:
            break
        k = min(2 * k, n)

    small = [float(v) for v in values[:count]]
    h = operator.h
    calibration = {'max_abs_small_over_h_3_2': max((abs(v) for v in small), default=0.0) / h ** 1.5}
    result = SmallEigenvalues(count=count, eigenvalues=[float(v) for v in values], threshold=threshold,
                              m0=m0, calibration=calibration)
    if result.matches is False:
        logger.warning(f"Small eigenvalue count {count} differs from the number of interior minima {m0}")
    logger.info(f"{count} eigenvalue(s) of {operator.tag} below {threshold:.4g} at h={h}")
    return result
