"""
離散作用汎関数

    S(φ) = Σ_k (Δt/2) |Δφ_k/Δt − b(m_k)|²,   m_k = (φ_k + φ_{k+1})/2

節点は経路に沿って展開した座標で持つ（最小像の増分で連続にする）。
"""

import logging
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Optional, Tuple, Union

import numpy as np

from ..core.csv_writer import write_csv
from ..core.exceptions import ActionError, PreconditionError
from ..fields import Drift
from ..geometry import Region, Torus
from ..landscape import CriticalPoint, integrate_flow

logger = logging.getLogger(__name__)


@dataclass
class Path:
    """
    時間一様な離散経路

    Attributes:
        nodes: 展開座標の節点 φ_0..φ_N (N+1, d)
        total_time: 総時間 T
    """
    nodes: np.ndarray
    total_time: float

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if len(self.nodes) < 3:
            raise PreconditionError(f"A path needs N >= 2 segments, got {len(self.nodes) - 1}")
        if not self.total_time > 0.0:
            raise PreconditionError(f"Path time must be positive, got {self.total_time}")

    @property
    def n_segments(self) -> int:
        return len(self.nodes) - 1

    @property
    def dt(self) -> float:
        return self.total_time / self.n_segments

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.total_time, len(self.nodes))

    def is_consistent(self, torus: Torus) -> bool:
        """隣接節点の差がすべて半周期未満か"""
        return bool(np.all(np.abs(np.diff(self.nodes, axis=0)) < 0.5 * torus.period))

    def canonical_nodes(self, torus: Torus) -> np.ndarray:
        return torus.canonical(self.nodes)


@dataclass
class ActionValue:
    """作用の値と区間ごとの寄与"""
    value: float
    segments: np.ndarray

    def to_dict(self) -> dict:
        return {'value': self.value, 'n_segments': int(len(self.segments)),
                'max_segment': float(self.segments.max())}


def _residuals(nodes: np.ndarray, dt: float, drift: Drift) -> Tuple[np.ndarray, np.ndarray]:
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    return (np.diff(nodes, axis=0) / dt) - drift(mid), mid


def action(path: Path, drift: Drift) -> ActionValue:
    """中点則による S(φ)"""
    r, _ = _residuals(path.nodes, path.dt, drift)
    segments = 0.5 * path.dt * np.sum(r * r, axis=-1)
    return ActionValue(value=float(segments.sum()), segments=segments)


def action_and_gradient(nodes: np.ndarray, dt: float, drift: Drift,
                        region: Optional[Region] = None, penalty: float = 0.0) -> Tuple[float, np.ndarray]:
    """
    作用（と領域外ペナルティ）およびその全節点に関する勾配

    Raises:
        ActionError: 作用が有限でない
    """
    r, mid = _residuals(nodes, dt, drift)
    value = 0.5 * dt * float(np.sum(r * r))
    # r_k の φ_k, φ_{k+1} に関する微分は ∓I/Δt − J(m_k)/2
    jt_r = np.einsum('kij,ki->kj', drift.jacobian(mid), r)
    grad = np.zeros_like(nodes)
    grad[1:] += r - 0.5 * dt * jt_r
    grad[:-1] += -r - 0.5 * dt * jt_r

    if region is not None and penalty > 0.0:
        g = region.level(nodes)
        outside = g > 0.0
        if np.any(outside):
            value += penalty * float(np.sum(g[outside] ** 2))
            grad[outside] += 2.0 * penalty * g[outside, None] * region.g.gradient(nodes[outside])

    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise ActionError("Non-finite action during optimization")
    return value, grad


def action_lower_bound(path: Path, f) -> float:
    """2(f(φ_N) − f(φ_0))"""
    return 2.0 * float(f.value(path.nodes[-1]) - f.value(path.nodes[0]))


def straight_path(x, y, torus: Torus, n_segments: int, total_time: float) -> Path:
    """x から最小像で y へ向かう線分"""
    x = np.asarray(x, dtype=float)
    y_lift = x + torus.minimage(np.asarray(y, dtype=float) - x)
    s = np.linspace(0.0, 1.0, n_segments + 1)[:, None]
    return Path(nodes=(1.0 - s) * x + s * y_lift, total_time=total_time)


def resample(path: Path, n_segments: int, by: str = 'time', total_time: Optional[float] = None) -> Path:
    """
    節点数を変えて補間し直す

    Args:
        path: 元の経路
        n_segments: 新しい区間数
        by: 'time'（時間一様）または 'arclength'（弧長一様）
        total_time: 新しい総時間（既定は元の値）
    """
    if by == 'time':
        param = path.times
    elif by == 'arclength':
        lengths = np.linalg.norm(np.diff(path.nodes, axis=0), axis=-1)
        param = np.concatenate([[0.0], np.cumsum(lengths)])
    else:
        raise PreconditionError(f"Unknown resampling mode {by!r}")
    target = np.linspace(0.0, param[-1], n_segments + 1)
    nodes = np.stack([np.interp(target, param, path.nodes[:, k]) for k in range(path.nodes.shape[1])], axis=-1)
    return Path(nodes=nodes, total_time=path.total_time if total_time is None else total_time)


def heteroclinic_path(drift: Drift, minimum: CriticalPoint, saddle: CriticalPoint, torus: Torus,
                      dt: float = 1e-3, eps: float = 1e-6) -> Path:
    """
    極小点 x₀ から鞍点 z への逆散逸流 Ẋ = ∇f − ℓ の軌道

    z から −∇f + ℓ の不安定方向へ ε·L だけずらして流し、x₀ に到達した軌道を
    時間反転する。戻り値は RK4 の刻み dt で時間一様。

    Raises:
        ActionError: どちらの向きからも x₀ に到達しない
    """
    f, ell = drift.f, drift.ell

    def reversed_field(x, strict: bool = True):
        velocity = -f.gradient(x, strict=strict)
        if not ell.is_zero:
            velocity = velocity + ell.value(x, strict=strict)
        return velocity

    jac = -saddle.hessian + (ell.jacobian(saddle.location) if not ell.is_zero else 0.0)
    values, vectors = np.linalg.eig(jac)
    direction = np.real(vectors[:, int(np.argmax(values.real))])
    direction /= np.linalg.norm(direction)

    for sign in (1.0, -1.0):
        start = saddle.location + sign * eps * torus.period * direction
        result = integrate_flow(reversed_field, f, start, dt, torus, [minimum])
        if result.converged:
            nodes = result.trajectory[::-1].copy()
            logger.debug(f"Heteroclinic path from {minimum.location.tolist()} to "
                         f"{saddle.location.tolist()}: {len(nodes)} nodes, T={result.t_end:.4g}")
            return Path(nodes=nodes, total_time=result.t_end)
    raise ActionError(f"Reverse flow from the saddle at {saddle.location.tolist()} "
                      f"does not reach the minimum at {minimum.location.tolist()}")


def export_path(path: Path, file_path: Union[str, FilePath]) -> FilePath:
    """ヘッダ k,t,x1..xd で書き出す"""
    d = path.nodes.shape[1]
    columns = [f"x{k + 1}" for k in range(d)]
    times = path.times

    def rows():
        for k, node in enumerate(path.nodes):
            row = {'k': k, 't': float(times[k])}
            row.update({columns[i]: float(node[i]) for i in range(d)})
            yield row

    return write_csv(file_path, ['k', 't'] + columns, rows())
