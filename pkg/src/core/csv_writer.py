"""
CSV 出力の共通処理

数値は最短の往復可能な10進表記（repr）で書き出す。
"""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """CSV セルの文字列表現"""
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, 'item'):
        return format_value(value.item())
    return str(value)


def write_csv(path: Union[str, Path], fieldnames: List[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """
    行の列を CSV に書き出す

    Args:
        path: 出力先（親ディレクトリは作成する）
        fieldnames: 列名
        rows: 列名をキーとする辞書の列

    Returns:
        書き出したパス
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open('w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_value(v) for k, v in row.items()})
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path
