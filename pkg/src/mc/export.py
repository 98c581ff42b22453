"""
ExitSampleSet の CSV 出力
"""

from pathlib import Path
from typing import Union

from ..core.csv_writer import write_csv
from .sampler import ExitSampleSet


def export_exit_samples(samples: ExitSampleSet, path: Union[str, Path]) -> Path:
    """ヘッダ path,tau,exit_x1..exit_xd,steps,censored で書き出す"""
    d = samples.exit_points.shape[1]
    exit_columns = [f"exit_x{k + 1}" for k in range(d)]
    fieldnames = ['path', 'tau'] + exit_columns + ['steps', 'censored']

    def rows():
        for i in range(len(samples.tau)):
            row = {'path': i, 'tau': float(samples.tau[i]),
                   'steps': int(samples.steps[i]), 'censored': bool(samples.censored[i])}
            for k, name in enumerate(exit_columns):
                row[name] = float(samples.exit_points[i, k])
            yield row

    return write_csv(path, fieldnames, rows())
