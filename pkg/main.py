#!/usr/bin/env python3
"""
kramers-lab - メインエントリーポイント
非可逆拡散の準安定性（脱出時間・主固有値・準ポテンシャル）を検証するバッチ実行

    kramers-lab <validate|predict|simulate|spectrum|mam|report> --config PATH
                [--out PATH] [--seed N] [--threads N]

終了コード: 0 成功, 1 使い方・設定の誤り, 2 仮定の不成立, 3 実行時の失敗
"""

import sys
import signal
import logging
import argparse
import traceback
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

# プロジェクトルートをPythonパスに追加
sys.path.insert(0, str(Path(__file__).parent))

from src import __version__
from src.core import ConfigManager, KramersLabError, LogManager
from src.lab import COMMANDS, run, write_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSUMPTION = 2
EXIT_RUNTIME = 3

logger = logging.getLogger('kramers_lab')


class UsageError(Exception):
    """コマンドライン引数の誤り"""
    pass


class ArgumentParser(argparse.ArgumentParser):
    """使い方の誤りを終了コード 1 で報告するパーサー"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> ArgumentParser:
    """引数パーサーを作る"""
    parser = ArgumentParser(prog='kramers-lab',
                            description='非可逆拡散の準安定性を数値的に検証する')
    parser.add_argument('command', choices=COMMANDS, help='実行するコマンド')
    parser.add_argument('--config', required=True, help='YAML設定ファイルのパス')
    parser.add_argument('--out', help='JSONレポートの出力先（省略時は標準出力）')
    parser.add_argument('--seed', type=int, help='mc.seed を上書きする')
    parser.add_argument('--threads', type=int, help='runtime.threads を上書きする（結果には影響しない）')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    return parser


def _terminate(signum, frame):
    """SIGTERM を KeyboardInterrupt として扱う"""
    raise KeyboardInterrupt(f"signal {signum}")


def main(argv: Optional[List[str]] = None) -> int:
    """メイン関数"""
    load_dotenv()
    signal.signal(signal.SIGTERM, _terminate)

    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"kramers-lab: error: {e}\n")
        return EXIT_USAGE

    overrides = {}
    if args.seed is not None:
        overrides['mc.seed'] = args.seed
    if args.threads is not None:
        overrides['runtime.threads'] = args.threads

    log_manager = None
    try:
        config = ConfigManager(args.config, overrides=overrides)
        log_manager = LogManager(config, run=f"{args.command}:{config.content_hash()[:12]}")
        logger.info(f"kramers-lab {__version__}: {args.command} with {args.config}")
        report = run(args.command, config)
        write_report(report, args.out)
        return EXIT_OK
    except KramersLabError as e:
        if not logging.getLogger().handlers:
            logging.basicConfig(level=logging.INFO, stream=sys.stderr)
        logger.error(f"{type(e).__name__}: {e.message}" + (f" ({e.details})" if e.details else ''))
        logger.debug(traceback.format_exc())
        return e.exit_code
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Unexpected failure: {e}")
        logger.debug(traceback.format_exc())
        return EXIT_RUNTIME
    finally:
        if log_manager is not None:
            log_manager.close()


if __name__ == "__main__":
    sys.exit(main())
