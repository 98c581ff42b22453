"""
コアモジュール - 設定・ログ・例外・計測
"""

from .config_manager import ConfigManager, DEFAULT_CONFIG
from .log_manager import LogManager, ColoredConsoleHandler
from .performance_monitor import StageTimer
from .exceptions import KramersLabError, ConfigError, AssumptionViolation

__all__ = [
    'ConfigManager',
    'DEFAULT_CONFIG',
    'LogManager',
    'ColoredConsoleHandler',
    'StageTimer',
    'KramersLabError',
    'ConfigError',
    'AssumptionViolation'
]
