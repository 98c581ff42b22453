"""
格子上の固有ベクトルの CSV 出力
"""

from pathlib import Path
from typing import Union

import numpy as np

from ..core.csv_writer import write_csv
from .grid import GridOperator


def export_eigenvector(operator: GridOperator, vector: np.ndarray, path: Union[str, Path]) -> Path:
    """ヘッダ i1..id,x1..xd,value で内部節点ごとに書き出す"""
    d = operator.dimension
    index_columns = [f"i{k + 1}" for k in range(d)]
    coord_columns = [f"x{k + 1}" for k in range(d)]
    values = np.real(np.asarray(vector))

    def rows():
        for n in range(operator.size):
            row = {'value': float(values[n])}
            for k in range(d):
                row[index_columns[k]] = int(operator.grid_index[n, k])
                row[coord_columns[k]] = float(operator.nodes[n, k])
            yield row

    return write_csv(path, index_columns + coord_columns + ['value'], rows())
