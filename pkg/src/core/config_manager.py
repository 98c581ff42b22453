"""
設定管理システム
YAMLファイルから実験設定を読み込み、デフォルト値管理、環境変数オーバーライド、
厳格なバリデーション機能を提供する
"""

import os
import logging
import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import yaml

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

# 環境変数プレフィックスとネスト区切り
ENV_PREFIX = "KRAMERS_LAB_"
ENV_SEPARATOR = "__"

# デフォルト設定（旗艦：可逆な二次元トーラス問題）
DEFAULT_CONFIG = {
    'problem': {
        'dimension': 2,
        'period': 1.0,
        'potential': 'cos(2*pi*x1) + cos(2*pi*x2)',
        'drift': {
            'kind': 'none',
            'amplitude': 0.0,
            'components': None
        },
        'domain': {
            'g': '-sin(pi*x1)*sin(pi*x2)',
            'origin': None
        }
    },
    'tolerances': {
        'grad_rel': 1e-6,
        'angle': 1e-6,
        'ortho': 1e-10,
        'cluster': 1e-8,
        'det': 1e-8
    },
    'landscape': {
        'grid_per_axis': 16,
        'samples': 1000,
        'boundary_samples': 2000,
        'flow_dt': 1e-3,
        'seed': 7
    },
    'kramers': {
        'h_values': [0.45, 0.4, 0.35, 0.3]
    },
    'mc': {
        'h_values': [0.45, 0.4, 0.35, 0.3],
        'dt': 5e-4,
        'n_paths': 2000,
        'max_steps': None,
        'seed': 20240611,
        'block_size': 256,
        'chunk_steps': 64,
        'start': None,
        'start_distribution': 'point',
        'leveling': {
            'h': 0.4,
            'starts': None,
            'n_paths': 2000
        },
        'committor': {
            'h': 0.3,
            'start': None,
            'center': None,
            'radius': 0.05,
            'n_paths': 5000
        },
        'exit_law': {
            'h': 0.4,
            'n_paths': 10000
        },
        'export_csv': None
    },
    'spectral': {
        'n_per_axis': 128,
        'h_values': [0.4, 0.3, 0.25],
        'potential': 'gibbs',
        'method': 'power',
        'threshold_c': None,
        'eta': None,
        'quasimode': {
            'delta1': None,
            'eps_rel': 0.1
        },
        'export_csv': None
    },
    'action': {
        'n_nodes': 128,
        't_factors': [2, 4, 8, 16, 32],
        'penalty': 1e6,
        'max_iter': 10000,
        'export_csv': None
    },
    'report': {
        'prefactor_h': 0.35,
        'thresholds': {
            'arrhenius_rel': 0.10,
            'qsd_low': 0.75,
            'qsd_high': 1.3,
            'ks_level': 0.05,
            'leveling_rel': 0.05,
            'prefactor_low': 0.7,
            'prefactor_high': 1.4,
            'quasipotential_rel': 0.02,
            'reverse_action_max': 1e-3,
            'quasimode_rel': 0.20
        }
    },
    'runtime': {
        'threads': 1
    },
    'logging': {
        'level': 'INFO',
        'format': '%(asctime)s [%(levelname)s] %(run)s %(name)s: %(message)s',
        'output': {
            'console': True,
            'file': False
        },
        'file': {
            'path': './logs/kramers_lab.log',
            'rotate_size_mb': 10,
            'rotate_count': 5
        },
        'modules': {}
    }
}

# 自由形式のキー（未知キー検査の対象外）
FREE_FORM_KEYS = {'logging.modules'}

# 実行環境依存でレポートに影響しないセクション
NON_SEMANTIC_KEYS = ('runtime', 'logging')

NUMBER = (int, float)

# バリデーションルール
VALIDATION_RULES = {
    'problem.dimension': {'type': int, 'min': 1, 'max': 8},
    'problem.period': {'type': NUMBER, 'min': 1e-12},
    'problem.potential': {'type': str},
    'problem.drift.kind': {'type': str, 'choices': ('none', 'rotational', 'components')},
    'problem.drift.amplitude': {'type': NUMBER},
    'problem.drift.components': {'type': list, 'optional': True},
    'problem.domain.g': {'type': str},
    'problem.domain.origin': {'type': list, 'optional': True},
    'tolerances.grad_rel': {'type': NUMBER, 'min': 0.0},
    'tolerances.angle': {'type': NUMBER, 'min': 0.0},
    'tolerances.ortho': {'type': NUMBER, 'min': 0.0},
    'tolerances.cluster': {'type': NUMBER, 'min': 0.0},
    'tolerances.det': {'type': NUMBER, 'min': 0.0},
    'landscape.grid_per_axis': {'type': int, 'min': 4},
    'landscape.samples': {'type': int, 'min': 1},
    'landscape.boundary_samples': {'type': int, 'min': 1},
    'landscape.flow_dt': {'type': NUMBER, 'min': 1e-12},
    'landscape.seed': {'type': int, 'min': 0},
    'kramers.h_values': {'type': list},
    'mc.h_values': {'type': list},
    'mc.dt': {'type': NUMBER, 'min': 1e-12},
    'mc.n_paths': {'type': int, 'min': 1},
    'mc.max_steps': {'type': int, 'min': 1, 'optional': True},
    'mc.seed': {'type': int, 'min': 0},
    'mc.block_size': {'type': int, 'min': 1},
    'mc.chunk_steps': {'type': int, 'min': 1},
    'mc.start': {'type': list, 'optional': True},
    'mc.start_distribution': {'type': str, 'choices': ('point', 'qsd')},
    'mc.leveling.h': {'type': NUMBER, 'min': 0.0},
    'mc.leveling.starts': {'type': list, 'optional': True},
    'mc.leveling.n_paths': {'type': int, 'min': 1},
    'mc.committor.h': {'type': NUMBER, 'min': 0.0},
    'mc.committor.start': {'type': list, 'optional': True},
    'mc.committor.center': {'type': list, 'optional': True},
    'mc.committor.radius': {'type': NUMBER, 'min': 0.0},
    'mc.committor.n_paths': {'type': int, 'min': 1},
    'mc.exit_law.h': {'type': NUMBER, 'min': 0.0},
    'mc.exit_law.n_paths': {'type': int, 'min': 1},
    'mc.export_csv': {'type': str, 'optional': True},
    'spectral.n_per_axis': {'type': int, 'min': 16},
    'spectral.h_values': {'type': list},
    'spectral.potential': {'type': str, 'choices': ('gibbs', 'pointwise')},
    'spectral.method': {'type': str, 'choices': ('power', 'arnoldi')},
    'spectral.threshold_c': {'type': NUMBER, 'min': 0.0, 'optional': True},
    'spectral.eta': {'type': NUMBER, 'min': 0.0, 'optional': True},
    'spectral.quasimode.delta1': {'type': NUMBER, 'min': 0.0, 'optional': True},
    'spectral.quasimode.eps_rel': {'type': NUMBER, 'min': 0.0, 'max': 1.0},
    'spectral.export_csv': {'type': str, 'optional': True},
    'action.n_nodes': {'type': int, 'min': 16},
    'action.t_factors': {'type': list},
    'action.penalty': {'type': NUMBER, 'min': 0.0},
    'action.max_iter': {'type': int, 'min': 1},
    'action.export_csv': {'type': str, 'optional': True},
    'report.prefactor_h': {'type': NUMBER, 'min': 1e-12},
    'runtime.threads': {'type': int, 'min': 1, 'max': 256},
    'logging.level': {'type': str, 'choices': ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')},
    'logging.format': {'type': str},
    'logging.output.console': {'type': bool},
    'logging.output.file': {'type': bool},
    'logging.file.path': {'type': str},
    'logging.file.rotate_size_mb': {'type': NUMBER, 'min': 0.0},
    'logging.file.rotate_count': {'type': int, 'min': 0},
}


def _walk(data: dict, keys: List[str], create: bool = False) -> dict:
    """keys をたどった先の辞書（create なら途中の階層を作る）"""
    for key in keys:
        if not isinstance(data.get(key), dict):
            if not create:
                raise KeyError(key)
            data[key] = {}
        data = data[key]
    return data


def _lookup(data: dict, keys: List[str], default: Any = None) -> Any:
    """ドット区切りキーの値（途中で切れたら default）"""
    try:
        parent = _walk(data, keys[:-1])
    except KeyError:
        return default
    return parent.get(keys[-1], default)


class ConfigDict(dict):
    """ドット記法でアクセス可能な辞書"""

    def __init__(self, data: dict):
        super().__init__()
        for key, value in data.items():
            if isinstance(value, dict):
                self[key] = ConfigDict(value)
            else:
                self[key] = value

    def __getattr__(self, key):
        if key in self:
            return self[key]
        raise AttributeError(f"'ConfigDict' object has no attribute '{key}'")

    def __setattr__(self, key, value):
        self[key] = value


class ConfigManager:
    """実験設定管理クラス

    config_path が None の場合はデフォルト設定のみを使う。
    パスが与えられた場合、ファイルが存在しない・壊れている・未知のキーを含む
    ときは ConfigError を送出する（黙ってデフォルトに戻さない）。
    """

    def __init__(self, config_path: Optional[Union[str, Path]] = None,
                 overrides: Optional[dict] = None):
        """
        初期化

        Args:
            config_path: 設定ファイルのパス
            overrides: コマンドライン由来の上書き（YAMLと環境変数の後に適用）
        """
        self.config_path = Path(config_path) if config_path is not None else None
        self.overrides = overrides or {}
        self._config = ConfigDict({})
        self.load()

    def load(self) -> None:
        """設定ファイルを読み込む"""
        config_data = copy.deepcopy(DEFAULT_CONFIG)

        if self.config_path is not None:
            if not self.config_path.exists():
                raise ConfigError(f"Configuration file {self.config_path} not found")
            try:
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    file_config = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"Failed to parse YAML file {self.config_path}", str(e))
            if not isinstance(file_config, dict):
                raise ConfigError(f"Top level of {self.config_path} must be a mapping")

            self._check_unknown_keys(file_config, DEFAULT_CONFIG, [])
            self._deep_merge(config_data, file_config)
            logger.info(f"Configuration loaded from {self.config_path}")

        # 環境変数でオーバーライド
        self._apply_environment_variables(config_data)

        # コマンドライン引数でオーバーライド
        for dotted, value in self.overrides.items():
            keys = dotted.split('.')
            _walk(config_data, keys[:-1], create=True)[keys[-1]] = value

        self._check_unknown_keys(config_data, DEFAULT_CONFIG, [])
        self._validate(config_data)

        self._config = ConfigDict(config_data)

    def _check_unknown_keys(self, data: dict, reference: dict, prefix: List[str]) -> None:
        """
        既知でないキーを検出する

        Args:
            data: 検査対象の辞書
            reference: デフォルト設定の対応部分
            prefix: 現在のキーパス
        """
        for key, value in data.items():
            path = prefix + [str(key)]
            dotted = '.'.join(path)
            if key not in reference:
                raise ConfigError(f"Unknown configuration key: {dotted}")
            if dotted in FREE_FORM_KEYS:
                if value is not None and not isinstance(value, dict):
                    raise ConfigError(f"{dotted} must be a mapping")
                continue
            if isinstance(reference[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"{dotted} must be a mapping, got {type(value).__name__}")
                self._check_unknown_keys(value, reference[key], path)

    def _deep_merge(self, base: dict, override: dict) -> None:
        """
        辞書を深くマージする（破壊的）

        Args:
            base: ベースとなる辞書
            override: 上書きする辞書
        """
        for key, value in override.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._deep_merge(base[key], value)
            else:
                base[key] = value

    def _apply_environment_variables(self, config: dict) -> None:
        """
        環境変数による上書き（KRAMERS_LAB_MC__N_PATHS -> mc.n_paths）

        値は YAML のスカラー・フロー列として読む。
        """
        for env_key in sorted(k for k in os.environ if k.startswith(ENV_PREFIX)):
            keys = env_key[len(ENV_PREFIX):].lower().split(ENV_SEPARATOR)
            value = self._parse_env_value(os.environ[env_key])
            _walk(config, keys[:-1], create=True)[keys[-1]] = value
            logger.info(f"Applied environment override: {env_key} = {value!r}")

    @staticmethod
    def _parse_env_value(value: str) -> Any:
        try:
            parsed = yaml.safe_load(value)
        except yaml.YAMLError:
            return value
        if isinstance(parsed, str):
            # YAML 1.1 は '1e-3' を文字列として読む
            try:
                return float(parsed)
            except ValueError:
                return parsed
        return parsed

    def _validate(self, config: dict) -> None:
        """
        設定値を検証する（違反は ConfigError）

        Args:
            config: 設定辞書
        """
        for rule_key, rule in VALIDATION_RULES.items():
            keys = rule_key.split('.')
            value = _lookup(config, keys)

            if value is None:
                if rule.get('optional'):
                    continue
                raise ConfigError(f"Missing value for {rule_key}")

            expected_type = rule['type']
            # boolはintのサブクラスなので明示的に区別する
            if isinstance(value, bool) and expected_type is not bool:
                raise ConfigError(f"Invalid type for {rule_key}: expected {self._type_name(expected_type)}, got bool")
            if expected_type is NUMBER and isinstance(value, int):
                value = float(value)
                _walk(config, keys[:-1], create=True)[keys[-1]] = value
            if not isinstance(value, expected_type):
                raise ConfigError(
                    f"Invalid type for {rule_key}: expected {self._type_name(expected_type)}, "
                    f"got {type(value).__name__}"
                )

            if 'choices' in rule and value not in rule['choices']:
                raise ConfigError(f"Invalid value for {rule_key}: {value!r} not in {rule['choices']}")
            if 'min' in rule and value < rule['min']:
                raise ConfigError(f"Value for {rule_key} out of range: {value} < {rule['min']}")
            if 'max' in rule and value > rule['max']:
                raise ConfigError(f"Value for {rule_key} out of range: {value} > {rule['max']}")

        self._validate_problem(config['problem'])
        for key in ('kramers.h_values', 'mc.h_values', 'spectral.h_values', 'action.t_factors'):
            values = _lookup(config, key.split('.'))
            if not all(isinstance(v, NUMBER) and not isinstance(v, bool) and v > 0 for v in values):
                raise ConfigError(f"{key} must be a list of positive numbers")
        for name, value in config['report']['thresholds'].items():
            if isinstance(value, bool) or not isinstance(value, NUMBER):
                raise ConfigError(f"report.thresholds.{name} must be a number")

    def _validate_problem(self, problem: dict) -> None:
        """問題定義の相互整合性を検証する"""
        d = problem['dimension']
        drift = problem['drift']
        if drift['kind'] == 'rotational' and d != 2:
            raise ConfigError("Rotational drift requires dimension 2")
        if drift['kind'] == 'components':
            components = drift.get('components')
            if not isinstance(components, list) or len(components) != d \
                    or not all(isinstance(c, str) for c in components):
                raise ConfigError(f"problem.drift.components must list {d} expressions")
        origin = problem['domain'].get('origin')
        if origin is not None and (len(origin) != d or not all(isinstance(v, NUMBER) for v in origin)):
            raise ConfigError(f"problem.domain.origin must have {d} numbers")

    @staticmethod
    def _type_name(expected_type) -> str:
        if isinstance(expected_type, tuple):
            return 'number'
        return expected_type.__name__

    def get(self, key: str, default: Any = None) -> Any:
        """
        設定値を取得

        Args:
            key: ドット区切りのキー
            default: デフォルト値

        Returns:
            設定値またはデフォルト値
        """
        return _lookup(self._config, key.split('.'), default)

    def set(self, key: str, value: Any) -> None:
        """
        設定値を更新（実行時のみ、検証なし）

        Args:
            key: ドット区切りのキー
            value: 設定する値
        """
        keys = key.split('.')
        current = self._config
        for k in keys[:-1]:
            if k not in current:
                current[k] = ConfigDict({})
            current = current[k]
        current[keys[-1]] = value

    def reload(self) -> None:
        """設定を再読み込み"""
        logger.info("Reloading configuration...")
        self.load()

    def to_dict(self) -> dict:
        """
        設定を通常の辞書として取得

        Returns:
            設定の辞書
        """
        return self._to_plain_dict(self._config)

    def semantic_dict(self) -> dict:
        """結果に影響するセクションのみの辞書（スレッド数・ログ設定を除く）"""
        data = self.to_dict()
        for key in NON_SEMANTIC_KEYS:
            data.pop(key, None)
        return data

    def content_hash(self) -> str:
        """
        結果に影響する設定の内容ハッシュ（git blob 形式の sha1）

        Returns:
            16進ダイジェスト
        """
        payload = json.dumps(self.semantic_dict(), sort_keys=True, separators=(',', ':')).encode('utf-8')
        header = f"blob {len(payload)}\0".encode('utf-8')
        return hashlib.sha1(header + payload).hexdigest()

    def _to_plain_dict(self, config_dict: Union[ConfigDict, dict]) -> dict:
        result = {}
        for key, value in config_dict.items():
            if isinstance(value, dict):
                result[key] = self._to_plain_dict(value)
            elif isinstance(value, list):
                result[key] = copy.deepcopy(value)
            else:
                result[key] = value
        return result

    def __getattr__(self, key):
        """ドット記法でのアクセスを提供"""
        if key.startswith('_'):
            raise AttributeError(key)
        if key in self._config:
            return self._config[key]
        raise AttributeError(f"'ConfigManager' object has no attribute '{key}'")

    def __getitem__(self, key):
        """辞書記法でのアクセスを提供"""
        return self._config[key]
