"""
モンテカルロ（Euler–Maruyama による脱出時間・committor・統計）
"""

from .streams import derived_seed, path_generator
from .sampler import (
    SimConfig, ExitSummary, ExitSampleSet, CommittorResult, LevelingResult,
    sample_exits, committor, ball_inside, leveling_check,
    simulate_ensemble, simulate_trajectory, start_points_from_weights, DEFAULT_MAX_STEPS
)
from .statistics import (
    ExitLawResult, ArrheniusFit, GibbsHistogramResult,
    wilson_interval, exit_law_test, arrhenius_fit, gibbs_weights, gibbs_histogram_test, dt_robustness
)
from .export import export_exit_samples

__all__ = [
    'derived_seed', 'path_generator',
    'SimConfig', 'ExitSummary', 'ExitSampleSet', 'CommittorResult', 'LevelingResult',
    'sample_exits', 'committor', 'ball_inside', 'leveling_check',
    'simulate_ensemble', 'simulate_trajectory', 'start_points_from_weights', 'DEFAULT_MAX_STEPS',
    'ExitLawResult', 'ArrheniusFit', 'GibbsHistogramResult',
    'wilson_interval', 'exit_law_test', 'arrhenius_fit', 'gibbs_weights', 'gibbs_histogram_test',
    'dt_robustness', 'export_exit_samples'
]
