"""
平坦トーラス (LT)^d
"""

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Torus:
    """
    平坦トーラス

    Attributes:
        dimension: 次元 d（1〜8）
        period: 周期 L
        origin: チャートの中心オフセット c（chart(x) = ((x − c) mod L) + c）
    """
    dimension: int
    period: float = 1.0
    origin: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not 1 <= self.dimension <= 8:
            raise ValueError(f"Torus dimension must be in 1..8, got {self.dimension}")
        if self.period <= 0:
            raise ValueError(f"Torus period must be positive, got {self.period}")
        if self.origin is not None:
            if len(self.origin) != self.dimension:
                raise ValueError(f"Origin must have {self.dimension} coordinates")
            object.__setattr__(self, 'origin', tuple(float(v) for v in self.origin))

    @property
    def offset(self) -> np.ndarray:
        if self.origin is None:
            return np.zeros(self.dimension)
        return np.asarray(self.origin, dtype=float)

    @property
    def volume(self) -> float:
        return self.period ** self.dimension

    def canonical(self, x) -> np.ndarray:
        """[0, L)^d の代表元"""
        y = np.mod(np.asarray(x, dtype=float), self.period)
        # 丸めで L ちょうどになった座標は 0 に戻す
        return np.where(y >= self.period, 0.0, y)

    def chart(self, x) -> np.ndarray:
        """[c, c + L)^d の代表元"""
        c = self.offset
        return self.canonical(np.asarray(x, dtype=float) - c) + c

    def minimage(self, dx) -> np.ndarray:
        """最小像の変位"""
        dx = np.asarray(dx, dtype=float)
        return dx - self.period * np.round(dx / self.period)

    def distance(self, x, y) -> np.ndarray:
        return np.linalg.norm(self.minimage(np.asarray(y, dtype=float) - np.asarray(x, dtype=float)), axis=-1)

    def lift_offsets(self) -> np.ndarray:
        """隣接セルへの平行移動 L·k, k ∈ {−1,0,1}^d（k=0 が先頭）"""
        shifts = [k for k in itertools.product((-1, 0, 1), repeat=self.dimension) if any(k)]
        return self.period * np.array([(0,) * self.dimension] + shifts, dtype=float)

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """チャート上の一様サンプル"""
        return self.offset + self.period * rng.random((n, self.dimension))

    def grid_axis(self, n: int) -> np.ndarray:
        """周期格子 i·L/n の座標"""
        return np.arange(n) * (self.period / n)

    def unique(self, points: Sequence[np.ndarray], tol: float) -> list:
        """トーラス距離 tol 以内の点を統合する（先に現れた点を残す）"""
        kept: list = []
        for p in points:
            if all(self.distance(p, q) > tol for q in kept):
                kept.append(np.asarray(p, dtype=float))
        return kept
