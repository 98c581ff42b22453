"""
Freidlin–Wentzell 作用：離散作用、最小作用法、W-グラフ
"""

from .path import (
    Path, ActionValue, action, action_and_gradient, action_lower_bound,
    straight_path, resample, heteroclinic_path, export_path
)
from .mam import (
    ActionRun, MinimumActionResult, time_grid, minimize_action, quasi_potential_matrix, refinement_change
)
from .wgraph import WGraphResult, wgraph_bound

__all__ = [
    'Path', 'ActionValue', 'action', 'action_and_gradient', 'action_lower_bound',
    'straight_path', 'resample', 'heteroclinic_path', 'export_path',
    'ActionRun', 'MinimumActionResult', 'time_grid', 'minimize_action', 'quasi_potential_matrix',
    'refinement_change', 'WGraphResult', 'wgraph_bound'
]
