"""
計算ステージの資源計測

各実験ステージ（地形解析、MC、スペクトル、作用最小化）の経過時間・CPU時間・
常駐メモリを psutil で計測し、ログへ出力する。計測値はレポートには含めない
（レポートの決定性を保つため）。
"""

import time
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List

import psutil

logger = logging.getLogger(__name__)


@dataclass
class StageRecord:
    """ステージ計測結果"""
    name: str
    wall_seconds: float = 0.0
    cpu_seconds: float = 0.0
    rss_mb: float = 0.0
    rss_delta_mb: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """辞書形式に変換"""
        return {
            'name': self.name,
            'wall_seconds': self.wall_seconds,
            'cpu_seconds': self.cpu_seconds,
            'memory': {
                'rss_mb': self.rss_mb,
                'delta_mb': self.rss_delta_mb
            }
        }


@dataclass
class StageTimer:
    """ステージ単位の計測器"""
    records: List[StageRecord] = field(default_factory=list)

    def __post_init__(self):
        self.process = psutil.Process()

    def _rss_mb(self) -> float:
        return self.process.memory_info().rss / (1024 * 1024)

    def _cpu(self) -> float:
        times = self.process.cpu_times()
        return times.user + times.system

    @contextmanager
    def stage(self, name: str) -> Iterator[StageRecord]:
        """
        with文で囲んだ区間を計測する

        Args:
            name: ステージ名

        Yields:
            計測中のStageRecord（終了時に値が入る）
        """
        record = StageRecord(name=name)
        rss0 = self._rss_mb()
        cpu0 = self._cpu()
        t0 = time.perf_counter()
        logger.info(f"Stage '{name}' started")
        try:
            yield record
        finally:
            record.wall_seconds = time.perf_counter() - t0
            record.cpu_seconds = self._cpu() - cpu0
            record.rss_mb = self._rss_mb()
            record.rss_delta_mb = record.rss_mb - rss0
            self.records.append(record)
            logger.info(
                f"Stage '{name}' finished: wall={record.wall_seconds:.2f}s "
                f"cpu={record.cpu_seconds:.2f}s rss={record.rss_mb:.1f}MB "
                f"(+{record.rss_delta_mb:.1f}MB)"
            )

    def summary(self) -> List[Dict[str, Any]]:
        """全ステージの計測結果"""
        return [record.to_dict() for record in self.records]
