"""
設定から問題（トーラス、f、ℓ、Ω、ドリフト）を組み立てる
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..core.exceptions import ConfigError, ExprError
from ..fields import Drift, ScalarField, VectorField
from ..geometry import Region, Torus
from ..landscape import (
    AssumptionReport, CriticalPoint, Tolerances, find_critical_points, interior_points, validate_assumptions
)

logger = logging.getLogger(__name__)


@dataclass
class Problem:
    """
    解析対象の問題

    Attributes:
        torus: トーラス (LT)^d
        f: ポテンシャル
        ell: 非可逆ドリフト ℓ
        region: 領域 Ω = {g < 0}
        drift: b = −(∇f + ℓ)
    """
    torus: Torus
    f: ScalarField
    ell: VectorField
    region: Region
    drift: Drift

    @property
    def dimension(self) -> int:
        return self.torus.dimension

    def to_dict(self) -> dict:
        return {
            'dimension': self.dimension,
            'period': self.torus.period,
            'origin': list(self.torus.origin) if self.torus.origin is not None else None,
            'potential': self.f.source,
            'drift': {'kind': self.ell.kind, 'amplitude': self.ell.amplitude, 'components': self.ell.sources},
            'domain': self.region.g.source
        }


def build_problem(config) -> Problem:
    """
    設定の problem セクションから Problem を作る

    式の構文エラーや次元の不整合は ConfigError に変換する（終了コード 1）。

    Args:
        config: ConfigManager

    Returns:
        Problem

    Raises:
        ConfigError: 式またはトーラスの定義が不正
    """
    d = int(config.get('problem.dimension'))
    period = float(config.get('problem.period'))
    origin = config.get('problem.domain.origin')
    kind = config.get('problem.drift.kind')

    try:
        torus = Torus(dimension=d, period=period, origin=tuple(origin) if origin is not None else None)
        f = ScalarField.from_source(config.get('problem.potential'), d, period)
        g = ScalarField.from_source(config.get('problem.domain.g'), d, period)
        if kind == 'rotational':
            ell = VectorField.rotational(f, float(config.get('problem.drift.amplitude')))
        elif kind == 'components':
            ell = VectorField.from_sources(config.get('problem.drift.components'), d, period)
        else:
            ell = VectorField.zero(d, period)
        region = Region(g, torus)
    except ExprError as e:
        raise ConfigError(f"Invalid expression in problem definition: {e.message}", e.details)
    except ValueError as e:
        raise ConfigError(f"Invalid problem definition: {e}")

    logger.info(f"Problem: d={d}, L={period}, f={f.source}, drift={ell.kind}, g={g.source}")
    return Problem(torus=torus, f=f, ell=ell, region=region, drift=Drift(f, ell))


@dataclass
class Landscape:
    """臨界点と仮定検証の結果"""
    critical_points: List[CriticalPoint]
    interior: List[CriticalPoint]
    report: AssumptionReport

    @property
    def interior_minima(self) -> List[CriticalPoint]:
        return [cp for cp in self.interior if cp.morse_index == 0]

    @property
    def x0(self) -> Optional[CriticalPoint]:
        return self.report.x0

    def to_dict(self) -> dict:
        return {
            'critical_points': [cp.to_dict() for cp in self.critical_points],
            'interior_minima': len(self.interior_minima),
            'assumptions': self.report.to_dict()
        }


def analyze_landscape(problem: Problem, config) -> Landscape:
    """臨界点を求めて標準仮定を検証する"""
    critical_points = find_critical_points(problem.f, problem.torus,
                                           grid_per_axis=int(config.get('landscape.grid_per_axis')),
                                           ell=problem.ell)
    report = validate_assumptions(
        problem.f, problem.ell, problem.region, critical_points,
        samples=int(config.get('landscape.samples')),
        boundary_samples=int(config.get('landscape.boundary_samples')),
        tolerances=Tolerances.from_config(config),
        seed=int(config.get('landscape.seed'))
    )
    return Landscape(critical_points=critical_points,
                     interior=interior_points(critical_points, problem.region), report=report)


def start_point(config_value, landscape: Optional[Landscape], label: str) -> np.ndarray:
    """
    設定の開始点（未指定なら x₀）

    Raises:
        ConfigError: 未指定で x₀ も定まらない
    """
    if config_value is not None:
        return np.asarray(config_value, dtype=float)
    if landscape is None or landscape.x0 is None:
        raise ConfigError(f"{label} must be set when the domain has no unique minimum")
    return landscape.x0.location.copy()
