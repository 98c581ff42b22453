"""
実験のオーケストレーション：問題の組み立て、コマンド、レポート
"""

from .problem import Landscape, Problem, analyze_landscape, build_problem, start_point
from .commands import COMMANDS, Lab, run
from .report import LedgerEntry, SCHEMA_VERSION, build_report, dumps, provenance, to_jsonable, write_report

__all__ = [
    'Landscape', 'Problem', 'analyze_landscape', 'build_problem', 'start_point',
    'COMMANDS', 'Lab', 'run',
    'LedgerEntry', 'SCHEMA_VERSION', 'build_report', 'dumps', 'provenance', 'to_jsonable', 'write_report',
]
