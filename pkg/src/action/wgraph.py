"""
W-グラフによる脱出コストの評価

節点は安定点 K_1..K_p と境界 ∂D。{∂D}-グラフは ∂D 以外の各節点から
ちょうど1本の矢印が出て閉路をもたないグラフで、W_D はその矢印に沿った
V の和の最小値。
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..core.exceptions import CombinatorialCapError, PreconditionError

logger = logging.getLogger(__name__)

MAX_STABLE_POINTS = 6


@dataclass
class WGraphResult:
    """W_D と最小を与えるグラフ"""
    value: float
    arrows: List[Tuple[int, int]]     # (i, j)、j == p は境界
    n_graphs: int

    def to_dict(self) -> dict:
        p = len(self.arrows)
        return {
            'value': self.value,
            'arrows': [[i, 'boundary' if j == p else j] for i, j in self.arrows],
            'n_graphs': self.n_graphs
        }


def _reaches_boundary(choice: Tuple[int, ...], p: int) -> bool:
    for start in range(p):
        node, steps = start, 0
        while node != p:
            node = choice[node]
            steps += 1
            if steps > p:
                return False
    return True


def wgraph_bound(v_matrix, stable_points: Optional[list] = None) -> WGraphResult:
    """
    {∂D}-グラフを全列挙して W_D を求める

    Args:
        v_matrix: 形状 (p, p+1)。[i, j] は K_i → K_j、[i, p] は K_i → ∂D の V（対角は無視）
        stable_points: ログ用の安定点（任意）

    Returns:
        WGraphResult

    Raises:
        CombinatorialCapError: p > 6
        PreconditionError: 行列の形が不正
    """
    V = np.asarray(v_matrix, dtype=float)
    if V.ndim != 2 or V.shape[1] != V.shape[0] + 1:
        raise PreconditionError(f"V matrix must have shape (p, p+1), got {V.shape}")
    p = V.shape[0]
    if p > MAX_STABLE_POINTS:
        raise CombinatorialCapError(f"W-graph enumeration is capped at {MAX_STABLE_POINTS} stable points, got {p}")
    if p == 0:
        raise PreconditionError("W-graph needs at least one stable point")
    off_diagonal = ~np.eye(p, p + 1, dtype=bool)
    if not np.all(np.isfinite(V[off_diagonal])):
        raise PreconditionError("V matrix must be complete (finite off-diagonal entries)")

    targets = [[j for j in range(p + 1) if j != i] for i in range(p)]
    best_value = np.inf
    best_choice: Tuple[int, ...] = ()
    n_graphs = 0
    for choice in itertools.product(*targets):
        if not _reaches_boundary(choice, p):
            continue
        n_graphs += 1
        total = float(sum(V[i, j] for i, j in enumerate(choice)))
        if total < best_value:
            best_value, best_choice = total, choice

    result = WGraphResult(value=best_value, arrows=list(enumerate(best_choice)), n_graphs=n_graphs)
    label = '' if stable_points is None else f" over {len(stable_points)} stable point(s)"
    logger.info(f"W-graph bound{label}: W_D = {best_value:.8g} ({n_graphs} graphs)")
    return result
