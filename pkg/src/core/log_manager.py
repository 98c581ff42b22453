"""
ログ管理

設定の logging.* からルートロガーを組み立てる。コンソールは標準エラー
（標準出力は JSON レポート専用）、ファイルは実行ごとに世代を送る。
各レコードには実行ラベル（コマンドと設定ハッシュ）が %(run)s として付く。
"""

import os
import sys
import logging
import logging.handlers
from pathlib import Path
from typing import Dict, Optional

LEVEL_COLORS = {
    logging.DEBUG: '\033[36m',
    logging.INFO: '\033[32m',
    logging.WARNING: '\033[33m',
    logging.ERROR: '\033[31m',
    logging.CRITICAL: '\033[35m',
}
RESET = '\033[0m'

DEFAULT_FORMAT = '%(asctime)s [%(levelname)s] %(run)s %(name)s: %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
NO_RUN = '-'


def parse_level(name) -> Optional[int]:
    """'info' などのレベル名を数値に（不明なら None）"""
    level = logging.getLevelName(str(name).upper())
    return level if isinstance(level, int) else None


class RunContextFilter(logging.Filter):
    """レコードに実行ラベルを付ける"""

    def __init__(self, run: Optional[str] = None):
        super().__init__()
        self.run = run or NO_RUN

    def filter(self, record: logging.LogRecord) -> bool:
        record.run = self.run
        return True


class ColoredConsoleHandler(logging.StreamHandler):
    """標準エラーへ出すコンソールハンドラー（TTY のときだけ色付け）"""

    def __init__(self, stream=None):
        super().__init__(stream if stream is not None else sys.stderr)
        self.is_tty = bool(getattr(self.stream, 'isatty', lambda: False)())

    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        if not self.is_tty or os.environ.get('NO_COLOR'):
            return text
        return f"{LEVEL_COLORS.get(record.levelno, '')}{text}{RESET}"


class RotatingFileHandlerWithCount(logging.handlers.RotatingFileHandler):
    """
    世代数を守るローテーションハンドラー

    rollover_on_open=True なら、空でない既存ファイルを開いた時点で世代を送り、
    1回の実行が1つのファイルに収まるようにする。rotate_count を超えた古い
    世代（以前の設定で残ったもの）も消す。
    """

    def __init__(self, filename, max_bytes: int = 0, backup_count: int = 0,
                 rollover_on_open: bool = True):
        super().__init__(filename, maxBytes=max_bytes, backupCount=backup_count, encoding='utf-8')
        if rollover_on_open and backup_count > 0 and os.path.getsize(self.baseFilename) > 0:
            self.doRollover()

    def doRollover(self):
        super().doRollover()
        if self.backupCount <= 0:
            return
        index = self.backupCount + 1
        while os.path.exists(f"{self.baseFilename}.{index}"):
            try:
                os.remove(f"{self.baseFilename}.{index}")
            except OSError:
                break
            index += 1


class LogManager:
    """ログ管理クラス"""

    def __init__(self, config, run: Optional[str] = None):
        """
        初期化

        Args:
            config: ConfigManagerインスタンス
            run: 実行ラベル（例 'report:3f2a9c0b1d4e'）
        """
        self.config = config
        self.context = RunContextFilter(run)
        self.loggers: Dict[str, logging.Logger] = {}
        self.handlers: Dict[str, logging.Handler] = {}
        self.root_logger = logging.getLogger()
        self.setup()

    def _attach(self, key: str, handler: logging.Handler, level: int = logging.DEBUG) -> None:
        handler.setFormatter(logging.Formatter(self.config.get('logging.format', DEFAULT_FORMAT),
                                               datefmt=DATE_FORMAT))
        handler.addFilter(self.context)
        handler.setLevel(level)
        self.root_logger.addHandler(handler)
        self.handlers[key] = handler

    def setup(self) -> None:
        """ルートロガーを設定から組み立て直す"""
        self.root_logger.setLevel(self._get_log_level(self.config.get('logging.level', 'INFO')))
        # 以前の LogManager が付けたハンドラーだけを外す
        for handler in list(self.root_logger.handlers):
            if isinstance(handler, (ColoredConsoleHandler, RotatingFileHandlerWithCount)):
                self.root_logger.removeHandler(handler)
                handler.close()
        self.handlers.clear()

        if self.config.get('logging.output.console', True):
            self._attach('console', ColoredConsoleHandler())
        if self.config.get('logging.output.file', False):
            self.add_file_handler(self.config.get('logging.file.path', './logs/kramers_lab.log'),
                                  handler_key='file')

        for module_name, level_name in (self.config.get('logging.modules', {}) or {}).items():
            logging.getLogger(module_name).setLevel(self._get_log_level(level_name))

    def get_logger(self, name: str) -> logging.Logger:
        """モジュール別レベルを反映したロガー"""
        if name not in self.loggers:
            logger = logging.getLogger(name)
            level_name = (self.config.get('logging.modules', {}) or {}).get(name)
            if level_name is not None:
                logger.setLevel(self._get_log_level(level_name))
            self.loggers[name] = logger
        return self.loggers[name]

    def set_level(self, level: str, logger_name: Optional[str] = None) -> None:
        """レベルを変更（logger_name が None ならルート）"""
        target = self.get_logger(logger_name) if logger_name else self.root_logger
        target.setLevel(self._get_log_level(level))

    def add_file_handler(self, filepath: str, level: Optional[str] = None,
                         handler_key: Optional[str] = None) -> None:
        """
        ローテーション付きファイルハンドラーを追加

        開けないパスは ERROR を残して無視する（ログ出力の失敗で実験を止めない）。

        Args:
            filepath: ファイルパス
            level: ログレベル（省略時は DEBUG）
            handler_key: ハンドラー登録名（省略時は file_<path>）
        """
        try:
            Path(filepath).parent.mkdir(parents=True, exist_ok=True)
            handler = RotatingFileHandlerWithCount(
                filepath,
                max_bytes=int(self.config.get('logging.file.rotate_size_mb', 10) * 1024 * 1024),
                backup_count=self.config.get('logging.file.rotate_count', 5)
            )
        except OSError as e:
            self.root_logger.error(f"Failed to add file handler for {filepath}: {e}")
            return
        self._attach(handler_key or f"file_{filepath}",
                     handler, self._get_log_level(level) if level else logging.DEBUG)

    def remove_file_handler(self, filepath: str) -> None:
        """add_file_handler で付けたハンドラーを外す"""
        handler = self.handlers.pop(f"file_{filepath}", None)
        if handler is not None:
            self.root_logger.removeHandler(handler)
            handler.close()

    def flush(self) -> None:
        for handler in self.handlers.values():
            handler.flush()

    def close(self) -> None:
        """登録したハンドラーを外して閉じる"""
        self.flush()
        for handler in self.handlers.values():
            self.root_logger.removeHandler(handler)
            handler.close()
        self.handlers.clear()

    def _get_log_level(self, level_name) -> int:
        level = parse_level(level_name)
        if level is None:
            self.root_logger.warning(f"Invalid log level: {level_name}, using INFO")
            return logging.INFO
        return level
