"""
ポテンシャル地形の解析：臨界点、鞍点データ、標準仮定、流れ
"""

from .critical_points import CriticalPoint, find_critical_points, interior_points
from .saddle import SaddleData, SaddleInvariants, check_saddle_invariants, saddle_analysis, saddle_from_matrices
from .flow import FlowResult, basin_membership, default_horizon, integrate_flow
from .assumptions import AssumptionReport, BoundaryRecord, Tolerances, validate_assumptions

__all__ = [
    'CriticalPoint', 'find_critical_points', 'interior_points',
    'SaddleData', 'SaddleInvariants', 'check_saddle_invariants', 'saddle_analysis', 'saddle_from_matrices',
    'FlowResult', 'basin_membership', 'default_horizon', 'integrate_flow',
    'AssumptionReport', 'BoundaryRecord', 'Tolerances', 'validate_assumptions',
]
