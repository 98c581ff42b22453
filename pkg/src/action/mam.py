"""
最小作用法による準ポテンシャル V(x, y) の推定
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ..core.exceptions import PreconditionError
from ..fields import Drift
from ..geometry import Region, Torus
from .path import Path, action_and_gradient, resample, straight_path

logger = logging.getLogger(__name__)

MIN_SEGMENTS = 16
GRAD_TOL = 1e-8
MAX_ITERATIONS = 10 ** 4
DEFAULT_PENALTY = 1e6
DEFAULT_T_FACTORS = (2.0, 4.0, 8.0, 16.0, 32.0)


@dataclass
class ActionRun:
    """1つの (T, 初期経路) に対する最適化の記録"""
    total_time: float
    initializer: str
    value: float
    iterations: int
    converged: bool
    monotone: bool

    def to_dict(self) -> dict:
        return {'T': self.total_time, 'initializer': self.initializer, 'value': self.value,
                'iterations': self.iterations, 'converged': self.converged, 'monotone': self.monotone}


@dataclass
class MinimumActionResult:
    """V の推定値と最適経路"""
    value: float
    path: Path
    runs: List[ActionRun] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(run.monotone for run in self.runs)

    def to_dict(self) -> dict:
        return {'value': self.value, 'T': self.path.total_time, 'n_segments': self.path.n_segments,
                'monotone': self.monotone, 'runs': [run.to_dict() for run in self.runs]}


def time_grid(period: float, barrier: float, factors: Sequence[float] = DEFAULT_T_FACTORS) -> List[float]:
    """T ∈ factors·(L²/Δ)"""
    if not barrier > 0.0:
        raise PreconditionError(f"Barrier must be positive to scale the time grid, got {barrier}")
    return [float(c) * period ** 2 / barrier for c in factors]


def _snap(point: np.ndarray, target: np.ndarray, period: float) -> np.ndarray:
    """target のリフトのうち point に最も近いもの"""
    return target + period * np.round((point - target) / period)


def _optimize(initial: Path, drift: Drift, region: Optional[Region], penalty: float,
              max_iter: int, label: str) -> Tuple[Path, ActionRun]:
    nodes = initial.nodes.copy()
    dt = initial.dt
    shape = nodes[1:-1].shape

    def objective(flat):
        nodes[1:-1] = flat.reshape(shape)
        value, grad = action_and_gradient(nodes, dt, drift, region, penalty)
        return value, grad[1:-1].ravel()

    history: List[float] = []

    def record(flat):
        history.append(objective(flat)[0])

    result = minimize(objective, nodes[1:-1].ravel(), jac=True, method='L-BFGS-B', callback=record,
                      options={'maxiter': max_iter, 'gtol': GRAD_TOL, 'ftol': 1e-15})
    nodes[1:-1] = result.x.reshape(shape)
    value, _ = action_and_gradient(nodes, dt, drift, region, penalty)
    monotone = all(b <= a * (1.0 + 1e-12) + 1e-15 for a, b in zip(history, history[1:]))
    run = ActionRun(total_time=initial.total_time, initializer=label, value=value,
                    iterations=int(result.nit), converged=bool(result.success), monotone=monotone)
    logger.debug(f"MAM T={initial.total_time:.4g} ({label}): S={value:.8g} after {result.nit} iterations")
    return Path(nodes=nodes.copy(), total_time=initial.total_time), run


def minimize_action(x, y, drift: Drift, torus: Torus, n_segments: int, t_values: Sequence[float],
                    region: Optional[Region] = None, penalty: float = DEFAULT_PENALTY,
                    initial_paths: Sequence[Path] = (), max_iter: int = MAX_ITERATIONS) -> MinimumActionResult:
    """
    x から y への離散作用を最小化する

    各 T について、最小像の線分と与えられた初期経路（弧長で N 区間に再配置）から
    L-BFGS-B で内部節点を最適化し、全体の最小値を返す。

    Args:
        x: 始点
        y: 終点
        drift: ドリフト
        torus: トーラス
        n_segments: 区間数 N（16以上）
        t_values: 総時間 T の候補
        region: 指定すると g > 0 の節点にペナルティを課す
        penalty: ペナルティ係数
        initial_paths: 追加の初期経路（ヘテロクリニック軌道など）
        max_iter: 最大反復回数

    Returns:
        MinimumActionResult

    Raises:
        PreconditionError: N < 16 または T の候補がない
        ActionError: 最適化中に作用が有限でなくなった
    """
    if n_segments < MIN_SEGMENTS:
        raise PreconditionError(f"minimize_action needs N >= {MIN_SEGMENTS}, got {n_segments}")
    if not t_values:
        raise PreconditionError("minimize_action needs at least one total time T")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if region is not None:
        x, _ = region.lift_inside(x)

    best: Optional[Path] = None
    best_value = np.inf
    runs: List[ActionRun] = []
    for T in t_values:
        candidates = [('straight', straight_path(x, y, torus, n_segments, T))]
        for k, extra in enumerate(initial_paths):
            guess = resample(extra, n_segments, by='arclength', total_time=T)
            guess.nodes[0] = _snap(guess.nodes[0], x, torus.period)
            guess.nodes[-1] = _snap(guess.nodes[-1], y, torus.period)
            candidates.append((f"initial_{k}", guess))
        for label, guess in candidates:
            path, run = _optimize(guess, drift, region, penalty, max_iter, label)
            runs.append(run)
            if run.value < best_value:
                best, best_value = path, run.value

    result = MinimumActionResult(value=float(best_value), path=best, runs=runs)
    logger.info(f"Minimum action from {x.tolist()} to {y.tolist()}: V ~ {result.value:.8g} "
                f"(T={best.total_time:.4g}, N={n_segments})")
    return result


def quasi_potential_matrix(points: Sequence, boundary_points: Sequence, drift: Drift, torus: Torus,
                           n_segments: int, t_values: Sequence[float],
                           region: Optional[Region] = None, penalty: float = DEFAULT_PENALTY) -> np.ndarray:
    """
    安定点どうしと境界への V の行列 (p, p+1)

    境界への値は与えられた境界点への V の最小値とする。対角は 0。
    """
    p = len(points)
    matrix = np.zeros((p, p + 1))
    for i, source in enumerate(points):
        for j, target in enumerate(points):
            if i != j:
                matrix[i, j] = minimize_action(source, target, drift, torus, n_segments, t_values,
                                               region, penalty).value
        matrix[i, p] = min(minimize_action(source, z, drift, torus, n_segments, t_values, region, penalty).value
                           for z in boundary_points)
    return matrix


def refinement_change(x, y, drift: Drift, torus: Torus, n_segments: int, t_values: Sequence[float],
                      region: Optional[Region] = None, initial_paths: Sequence[Path] = ()) -> dict:
    """N と 2N での V 推定値の相対変化"""
    coarse = minimize_action(x, y, drift, torus, n_segments, t_values, region, initial_paths=initial_paths)
    fine = minimize_action(x, y, drift, torus, 2 * n_segments, t_values, region, initial_paths=initial_paths)
    change = abs(fine.value - coarse.value) / max(abs(fine.value), np.finfo(float).tiny)
    return {'n_segments': [n_segments, 2 * n_segments], 'values': [coarse.value, fine.value],
            'relative_change': change}

