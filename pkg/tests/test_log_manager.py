"""
ログシステムのテストコード
"""

import io
import logging
import os
import tempfile
from unittest.mock import patch

import pytest

from src.core.config_manager import ConfigManager
from src.core.log_manager import ColoredConsoleHandler, LogManager, RotatingFileHandlerWithCount, parse_level


class TestLogManager:
    """LogManagerのテストクラス"""

    @pytest.fixture
    def config(self):
        """テスト用のConfigManagerを作成"""
        return ConfigManager()

    @pytest.fixture
    def log_manager(self, config):
        """テスト用のLogManagerを作成（終了時にハンドラーを外す）"""
        manager = LogManager(config)
        yield manager
        manager.close()

    @pytest.fixture
    def temp_log_file(self):
        """一時的なログファイル"""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.log', delete=False) as f:
            temp_path = f.name
        yield temp_path
        for path in [temp_path] + [f"{temp_path}.{i}" for i in range(1, 10)]:
            if os.path.exists(path):
                os.unlink(path)

    # TC-001: 初期化
    def test_init_log_manager(self, log_manager, config):
        """コンソールハンドラーがルートロガーに登録される"""
        assert log_manager.config is config
        assert isinstance(log_manager.handlers['console'], ColoredConsoleHandler)
        assert log_manager.handlers['console'] in logging.getLogger().handlers

    # TC-002: コンソール出力は標準エラー
    def test_console_handler_writes_to_stderr(self):
        """標準出力はJSONレポート専用なのでログは標準エラーへ"""
        import sys
        handler = ColoredConsoleHandler()
        assert handler.stream is sys.stderr

    # TC-003: ロガーの取得とキャッシュ
    def test_get_logger(self, log_manager):
        logger = log_manager.get_logger('src.mc.sampler')
        assert logger.name == 'src.mc.sampler'
        assert log_manager.get_logger('src.mc.sampler') is logger

    # TC-004: モジュール別ログレベル
    def test_module_specific_level(self):
        config = ConfigManager(overrides={'logging.modules': {'src.spectral.eigen': 'DEBUG'}})
        manager = LogManager(config)
        try:
            assert logging.getLogger('src.spectral.eigen').level == logging.DEBUG
        finally:
            manager.close()
            logging.getLogger('src.spectral.eigen').setLevel(logging.NOTSET)

    # TC-005: レベル変更
    def test_set_level(self, log_manager):
        log_manager.set_level('WARNING', 'src.action.mam')
        assert logging.getLogger('src.action.mam').level == logging.WARNING
        logging.getLogger('src.action.mam').setLevel(logging.NOTSET)

    # TC-006: 不正なレベル
    def test_invalid_level_falls_back_to_info(self, log_manager):
        assert log_manager._get_log_level('LOUD') == logging.INFO

    # TC-007: ファイル出力
    def test_file_handler_writes_messages(self, log_manager, temp_log_file):
        """ファイルハンドラー経由でメッセージが書き込まれる"""
        log_manager.add_file_handler(temp_log_file)
        logging.getLogger('src.lab.commands').warning("Sweep finished at h=0.4")
        log_manager.flush()
        with open(temp_log_file, encoding='utf-8') as f:
            assert "Sweep finished at h=0.4" in f.read()
        log_manager.remove_file_handler(temp_log_file)
        assert f"file_{temp_log_file}" not in log_manager.handlers

    # TC-008: 色付けは TTY のときだけ
    def test_no_color_for_non_tty(self):
        stream = io.StringIO()
        handler = ColoredConsoleHandler(stream)
        handler.setFormatter(logging.Formatter('%(message)s'))
        record = logging.LogRecord('x', logging.ERROR, __file__, 1, "plain", None, None)
        assert handler.format(record) == "plain"

    # TC-009: NO_COLOR の尊重
    def test_no_color_env_disables_color(self):
        stream = io.StringIO()
        handler = ColoredConsoleHandler(stream)
        handler.is_tty = True
        handler.setFormatter(logging.Formatter('%(message)s'))
        record = logging.LogRecord('x', logging.ERROR, __file__, 1, "plain", None, None)
        with patch.dict(os.environ, {'NO_COLOR': '1'}):
            assert handler.format(record) == "plain"
        with patch.dict(os.environ, {}, clear=True):
            assert handler.format(record).startswith('\033[31m')

    # TC-010: 再初期化で自分のハンドラーだけを外す
    def test_setup_replaces_own_handlers_only(self, config):
        foreign = logging.NullHandler()
        root = logging.getLogger()
        root.addHandler(foreign)
        first = LogManager(config)
        second = LogManager(config)
        try:
            consoles = [h for h in root.handlers if isinstance(h, ColoredConsoleHandler)]
            assert len(consoles) == 1
            assert foreign in root.handlers
        finally:
            second.close()
            first.close()
            root.removeHandler(foreign)

    # TC-011: close 後はハンドラーが残らない
    def test_close_removes_handlers(self, config):
        manager = LogManager(config)
        manager.close()
        assert not manager.handlers
        assert not any(isinstance(h, ColoredConsoleHandler) for h in logging.getLogger().handlers)

    # TC-012: 実行ラベル
    def test_run_label_in_records(self, temp_log_file):
        """%(run)s にコマンドと設定ハッシュが入り、ラベルなしは '-'"""
        config = ConfigManager(overrides={'logging.format': '%(run)s|%(message)s'})
        manager = LogManager(config, run='spectrum:0123abcd')
        try:
            manager.add_file_handler(temp_log_file)
            logging.getLogger('src.spectral.grid').warning("Cell Peclet number 1.3")
            manager.flush()
            with open(temp_log_file, encoding='utf-8') as f:
                assert "spectrum:0123abcd|Cell Peclet number 1.3" in f.read()
        finally:
            manager.close()
        unlabeled = LogManager(config)
        assert unlabeled.context.run == '-'
        unlabeled.close()

    # TC-013: 既存ファイルは開いた時点で世代を送る
    def test_rollover_on_open(self, temp_log_file):
        with open(temp_log_file, 'w', encoding='utf-8') as f:
            f.write("previous run\n")
        handler = RotatingFileHandlerWithCount(temp_log_file, backup_count=2)
        handler.close()
        with open(f"{temp_log_file}.1", encoding='utf-8') as f:
            assert f.read() == "previous run\n"
        assert os.path.getsize(temp_log_file) == 0

    # TC-014: レベル名の解釈
    def test_parse_level(self):
        assert parse_level('debug') == logging.DEBUG
        assert parse_level('WARNING') == logging.WARNING
        assert parse_level('LOUD') is None
