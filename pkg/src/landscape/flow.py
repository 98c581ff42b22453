"""
決定論的な流れ φ_t の積分と吸引域の判定
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..core.exceptions import IntegratorStepError, PreconditionError
from ..fields import ScalarField
from ..geometry import Region, Torus
from .critical_points import CriticalPoint

logger = logging.getLogger(__name__)

F_INCREASE_TOL = 1e-9
ARRIVAL_REL = 1e-8
ARRIVAL_SPEED = 1e-8


@dataclass
class FlowResult:
    """流れの積分結果"""
    trajectory: np.ndarray                  # 展開座標 (n, d)
    times: np.ndarray
    limit: Optional[CriticalPoint] = None   # ω極限の臨界点
    exited: bool = False
    exit_time: Optional[float] = None
    exit_point: Optional[np.ndarray] = None

    @property
    def converged(self) -> bool:
        return self.limit is not None

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def status(self) -> str:
        if self.exited:
            return 'exited'
        if self.converged:
            return 'converged'
        return 'not converged by t_max'


def default_horizon(critical_points: Sequence[CriticalPoint], period: float) -> float:
    """t_max = 50·L²/（内部極小点のヘッセ行列の最小固有値）"""
    curvatures = [cp.eigenvalues[0] for cp in critical_points if cp.morse_index == 0]
    if not curvatures:
        return 50.0 * period ** 2
    return 50.0 * period ** 2 / min(curvatures)


def _rk4(velocity: Callable, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = velocity(y)
    k2 = velocity(y + 0.5 * dt * k1)
    k3 = velocity(y + 0.5 * dt * k2)
    k4 = velocity(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _arrived(y: np.ndarray, speed: float, torus: Torus,
             critical_points: Sequence[CriticalPoint]) -> Optional[CriticalPoint]:
    if speed > ARRIVAL_SPEED:
        return None
    for cp in critical_points:
        if torus.distance(y, cp.location) <= ARRIVAL_REL * torus.period:
            return cp
    return None


def integrate_flow(velocity: Callable, f: ScalarField, x0, dt: float, torus: Torus,
                   critical_points: Sequence[CriticalPoint] = (), t_max: Optional[float] = None,
                   region: Optional[Region] = None, check_monotone: bool = True) -> FlowResult:
    """
    RK4 で流れを積分する

    Args:
        velocity: 速度場（通常は Drift）
        f: 単調減少を検査するポテンシャル
        x0: 初期点
        dt: 時間刻み
        torus: トーラス
        critical_points: 到達判定に使う既知の臨界点
        t_max: 打ち切り時刻（None なら default_horizon）
        region: 指定すると g ≥ 0 で脱出として停止する
        check_monotone: f の増加を検査するか

    Returns:
        FlowResult

    Raises:
        IntegratorStepError: 1ステップで f が許容値を超えて増加した
    """
    if dt <= 0.0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    if t_max is None:
        t_max = default_horizon(critical_points, torus.period)

    y = np.asarray(x0, dtype=float).copy()
    if region is not None:
        y, _ = region.lift_inside(y)
    points: List[np.ndarray] = [y.copy()]
    times: List[float] = [0.0]
    f_prev = float(f.value(y))

    t = 0.0
    n_steps = int(np.ceil(t_max / dt))
    limit = _arrived(y, float(np.linalg.norm(velocity(y))), torus, critical_points)
    for _ in range(n_steps if limit is None else 0):
        y_next = _rk4(velocity, y, dt)
        if not np.all(np.isfinite(y_next)):
            raise IntegratorStepError(f"Non-finite state at t={t:.6g}")
        f_next = float(f.value(y_next))
        if check_monotone and f_next > f_prev + F_INCREASE_TOL:
            raise IntegratorStepError(
                f"f increased by {f_next - f_prev:.3e} at t={t:.6g}; reduce dt (dt={dt})"
            )
        if region is not None and region.level(y_next) >= 0.0:
            crossing, s = region.bisect(y[None, :], y_next[None, :])
            exit_time = t + float(s[0]) * dt
            points.append(crossing[0])
            times.append(exit_time)
            return FlowResult(trajectory=np.array(points), times=np.array(times), exited=True,
                              exit_time=exit_time, exit_point=torus.canonical(crossing[0]))
        t += dt
        y, f_prev = y_next, f_next
        points.append(y.copy())
        times.append(t)
        limit = _arrived(y, float(np.linalg.norm(velocity(y))), torus, critical_points)
        if limit is not None:
            break

    if limit is None:
        logger.debug(f"Flow from {np.asarray(x0).tolist()} not converged by t_max={t_max:.6g}")
    return FlowResult(trajectory=np.array(points), times=np.array(times), limit=limit)


def basin_membership(region: Region, target: CriticalPoint, x0, velocity: Callable, f: ScalarField,
                     critical_points: Sequence[CriticalPoint], dt: float = 1e-3,
                     t_max: Optional[float] = None) -> bool:
    """
    x0 が target の吸引域（Ω 内に留まって target に収束する点の集合）に属するか

    Raises:
        PreconditionError: x0 が Ω の外
    """
    if not region.contains(x0):
        raise PreconditionError(f"Start point {np.asarray(x0).tolist()} is outside the domain")
    result = integrate_flow(velocity, f, x0, dt, region.torus, critical_points,
                            t_max=t_max, region=region)
    member = (not result.exited and result.limit is not None
              and region.torus.distance(result.limit.location, target.location) <= 1e-6 * region.torus.period)
    logger.debug(f"Basin check from {np.asarray(x0).tolist()}: {result.status} "
                 f"after {len(result.trajectory)} points -> {member}")
    return member
