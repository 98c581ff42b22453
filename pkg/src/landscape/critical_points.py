"""
臨界点の探索と分類

格子上の各シードから減衰付きニュートン法で ∇f = 0 を解き、
収束点を正準座標の辞書式順に並べてからトーラス距離で重複を除く。
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..core.exceptions import MorseViolationError, PreconditionError
from ..fields import ScalarField, VectorField
from ..geometry import Torus

logger = logging.getLogger(__name__)

MAX_NEWTON_ITERATIONS = 100
MAX_HALVINGS = 30
DEDUP_REL = 1e-6
# |∇f| ≤ NEWTON_TOL·(1 + ‖Hess f‖·L) で収束とする
NEWTON_TOL = 1e-10
# 退化した臨界点ではニュートン法が O(√NEWTON_TOL) の距離で止まり、
# ヘッセ行列の固有値も同じ桁で残る
MORSE_REL = 10.0 * np.sqrt(NEWTON_TOL)


@dataclass
class CriticalPoint:
    """f の臨界点"""
    location: np.ndarray       # 正準代表
    hessian: np.ndarray
    eigenvalues: np.ndarray    # Hess f の固有値（昇順）
    morse_index: int
    grad_residual: float
    f_value: float
    ell_norm: float = 0.0      # |ℓ(z)|

    @property
    def kind(self) -> str:
        d = len(self.location)
        if self.morse_index == 0:
            return 'minimum'
        if self.morse_index == d:
            return 'maximum'
        return 'saddle'

    def to_dict(self) -> dict:
        return {
            'location': self.location.tolist(),
            'kind': self.kind,
            'morse_index': self.morse_index,
            'f': self.f_value,
            'hessian_eigenvalues': self.eigenvalues.tolist(),
            'grad_residual': self.grad_residual,
            'ell_norm': self.ell_norm
        }


def _seed_grid(torus: Torus, n: int) -> np.ndarray:
    axes = [torus.offset[i] + torus.grid_axis(n) for i in range(torus.dimension)]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _newton_step(H: np.ndarray, G: np.ndarray) -> np.ndarray:
    try:
        return -np.linalg.solve(H, G[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return -(np.linalg.pinv(H) @ G[..., None])[..., 0]


def newton_polish(f: ScalarField, x: np.ndarray, torus: Torus,
                  max_iter: int = MAX_NEWTON_ITERATIONS) -> np.ndarray:
    """
    減衰付きニュートン法（ベクトル化）

    Args:
        f: ポテンシャル
        x: 形状 (m, d) の初期点
        torus: トーラス
        max_iter: 最大反復回数

    Returns:
        形状 (m,) の収束判定（x は更新される）
    """
    L = torus.period
    converged = np.zeros(len(x), dtype=bool)
    failed = np.zeros(len(x), dtype=bool)
    for _ in range(max_iter):
        active = ~(converged | failed)
        if not active.any():
            break
        xa = x[active]
        G = f.gradient(xa)
        H = f.hessian(xa)
        norm = np.linalg.norm(G, axis=-1)
        tol = NEWTON_TOL * (1.0 + np.linalg.norm(H, axis=(-1, -2)) * L)
        done = norm <= tol
        step = _newton_step(H, G)

        # |∇f| が減るまでステップを半分にする
        t = np.ones(len(xa))
        accepted = done.copy()
        trial = xa.copy()
        for _ in range(MAX_HALVINGS):
            pending = ~accepted
            if not pending.any():
                break
            candidate = xa[pending] + t[pending, None] * step[pending]
            better = np.linalg.norm(f.gradient(candidate), axis=-1) < norm[pending]
            idx = np.flatnonzero(pending)
            trial[idx[better]] = candidate[better]
            accepted[idx[better]] = True
            t[idx[~better]] *= 0.5
        stalled = ~accepted
        rows = np.flatnonzero(active)
        x[rows] = np.where(done[:, None], xa, trial)
        converged[rows[done]] = True
        failed[rows[stalled]] = True

    # 最終反復後にも判定する
    remaining = ~(converged | failed)
    if remaining.any():
        G = f.gradient(x[remaining])
        H = f.hessian(x[remaining])
        ok = np.linalg.norm(G, axis=-1) <= NEWTON_TOL * (1.0 + np.linalg.norm(H, axis=(-1, -2)) * L)
        converged[np.flatnonzero(remaining)[ok]] = True
    return converged


def classify(f: ScalarField, location: np.ndarray, ell: Optional[VectorField] = None,
             reference: float = 0.0) -> CriticalPoint:
    """
    収束点を分類する（退化していれば MorseViolationError）

    reference は他の臨界点も含めたヘッセ行列の成分の尺度。
    """
    H = f.hessian(location)
    eigenvalues = np.linalg.eigvalsh(H)
    scale = max(float(np.abs(eigenvalues).max()), reference)
    if scale == 0.0 or np.abs(eigenvalues).min() <= MORSE_REL * scale:
        raise MorseViolationError(
            f"Degenerate Hessian at critical point {location.tolist()}",
            f"eigenvalues={eigenvalues.tolist()}"
        )
    ell_norm = 0.0
    if ell is not None and not ell.is_zero:
        ell_norm = float(np.linalg.norm(ell.value(location)))
    return CriticalPoint(
        location=location,
        hessian=H,
        eigenvalues=eigenvalues,
        morse_index=int(np.sum(eigenvalues < 0.0)),
        grad_residual=float(np.linalg.norm(f.gradient(location))),
        f_value=float(f.value(location)),
        ell_norm=ell_norm
    )


def find_critical_points(f: ScalarField, torus: Torus, grid_per_axis: int = 16,
                         ell: Optional[VectorField] = None) -> List[CriticalPoint]:
    """
    f の臨界点をすべて求める

    Args:
        f: ポテンシャル
        torus: トーラス
        grid_per_axis: 各軸のシード数（4以上）
        ell: 指定すると各点で |ℓ(z)| を記録する

    Returns:
        正準座標の辞書式順に並んだ臨界点
    """
    if grid_per_axis < 4:
        raise PreconditionError(f"grid_per_axis must be at least 4, got {grid_per_axis}")
    x = _seed_grid(torus, grid_per_axis)
    converged = newton_polish(f, x, torus)
    logger.debug(f"Newton converged at {converged.sum()} of {len(x)} seeds")

    points = torus.canonical(x[converged])
    order = np.lexsort(points.T[::-1]) if len(points) else np.array([], dtype=int)
    unique = torus.unique(points[order], DEDUP_REL * torus.period)
    reference = max((float(np.abs(f.hessian(p)).max()) for p in unique), default=0.0)
    result = [classify(f, p, ell, reference) for p in unique]
    logger.info(f"Found {len(result)} critical point(s): "
                + ", ".join(f"{cp.kind}@{np.round(cp.location, 6).tolist()}" for cp in result))
    return result


def interior_points(critical_points: Sequence[CriticalPoint], region) -> List[CriticalPoint]:
    """Ω の内部にある臨界点"""
    return [cp for cp in critical_points if region.contains(cp.location)]
