"""
生成作用素の格子離散化とスペクトル診断
"""

from .grid import GridOperator, TAGS, assemble, grid_nodes, retag
from .eigen import (
    SpectralResult, SmallEigenvalues, principal_eig, small_eig_count, small_eig_threshold
)
from .diagnostics import (
    ConcentrationReport, QuasimodeReport, BoundaryProfile, MeanExitTimeGrid,
    smooth_step, sublevel_component, comparison_vector, eigenfunction_concentration,
    quadratic_form, dirichlet_energy, boundary_profile, quasimode_vector, quasimode_rayleigh,
    mean_exit_time_grid, qsd_vector, qsd_identity, accretivity_check, transpose_defect, grid_convergence
)
from .export import export_eigenvector

__all__ = [
    'GridOperator', 'TAGS', 'assemble', 'grid_nodes', 'retag',
    'SpectralResult', 'SmallEigenvalues', 'principal_eig', 'small_eig_count', 'small_eig_threshold',
    'ConcentrationReport', 'QuasimodeReport', 'BoundaryProfile', 'MeanExitTimeGrid',
    'smooth_step', 'sublevel_component', 'comparison_vector', 'eigenfunction_concentration',
    'quadratic_form', 'dirichlet_energy', 'boundary_profile', 'quasimode_vector', 'quasimode_rayleigh',
    'mean_exit_time_grid', 'qsd_vector', 'qsd_identity', 'accretivity_check', 'transpose_defect',
    'grid_convergence', 'export_eigenvector'
]
