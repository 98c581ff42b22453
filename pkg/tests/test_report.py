"""
JSON レポートと合否台帳のテストコード
"""

import json
import math

import numpy as np
import pytest

from src.core import ConfigManager
from src.lab import SCHEMA_VERSION, LedgerEntry, build_report, dumps, provenance, to_jsonable, write_report
from src.lab.report import (
    arrhenius_entry, exit_law_entry, prefactor_entry, qsd_entry, quasimode_entry, quasipotential_entry,
    spectral_structure_entry
)


class TestJson:
    """JSON 化のテストクラス"""

    # TC-001: numpy 型の変換
    def test_to_jsonable(self):
        data = to_jsonable({
            'array': np.arange(3),
            'scalar': np.float64(1.5),
            'flag': np.bool_(True),
            'nan': float('nan'),
            'inf': np.inf,
            'complex': 1 + 2j,
            1: (np.int64(4),)
        })
        assert data == {'array': [0, 1, 2], 'scalar': 1.5, 'flag': True, 'nan': None, 'inf': None,
                        'complex': {'real': 1.0, 'imag': 2.0}, '1': [4]}

    # TC-002: 同じ設定から同じバイト列
    def test_report_is_deterministic(self):
        """スレッド数とログ設定はレポートに影響しない"""
        first = build_report('validate', ConfigManager(overrides={'runtime.threads': 1}), {'x': np.float64(0.1)})
        second = build_report('validate', ConfigManager(overrides={'runtime.threads': 8,
                                                                   'logging.level': 'DEBUG'}),
                              {'x': np.float64(0.1)})
        assert dumps(first) == dumps(second)
        assert first['schema'] == SCHEMA_VERSION
        assert first['command'] == 'validate'
        assert len(first['config_hash']) == 40

    # TC-003: 台帳
    def test_ledger_in_report(self):
        ledger = [LedgerEntry('a', 1.0, 2.0, True), LedgerEntry('b', 3.0, 2.0, False)]
        report = build_report('report', ConfigManager(), {}, ledger)
        assert [entry['pass'] for entry in report['ledger']] == [True, False]
        assert report['ledger_passed'] is False

    # TC-004: 非有限値は書き出さない
    def test_dumps_rejects_raw_nan(self):
        with pytest.raises(ValueError):
            dumps({'x': float('nan')})
        assert json.loads(dumps(to_jsonable({'x': float('nan')}))) == {'x': None}

    # TC-005: ファイルと標準出力
    def test_write_report(self, tmp_path, capsys):
        report = {'b': 1, 'a': [1.5]}
        out = tmp_path / 'nested' / 'report.json'
        write_report(report, out)
        text = out.read_text(encoding='utf-8')
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == report
        write_report(report)
        assert json.loads(capsys.readouterr().out) == report

    # TC-006: 由来
    def test_provenance(self):
        assert provenance('mc', seed=1, h=0.4) == {'module': 'mc', 'seed': 1, 'grid': None, 'h': 0.4}


class TestLedger:
    """合否判定のテストクラス"""

    # TC-007: アレニウスの傾き
    def test_arrhenius_entry(self):
        assert arrhenius_entry(4.1, 4.0, 0.05).passed
        assert not arrhenius_entry(4.5, 4.0, 0.05).passed
        assert not arrhenius_entry(None, 4.0, 0.05).passed

    # TC-008: 準定常分布の窓と指数則
    def test_qsd_and_exit_law(self):
        assert qsd_entry(1.05, 0.8, 1.25).passed
        assert not qsd_entry(math.nan, 0.8, 1.25).passed
        assert exit_law_entry(0.3, 0.01).passed
        assert not exit_law_entry(None, 0.01).passed

    # TC-009: 前因子
    def test_prefactor_entry(self):
        """目標温度で窓に入り、小さい h ほど 1 に近い"""
        entry = prefactor_entry({0.5: 1.4, 0.35: 1.2, 0.25: 1.1}, 0.35, 0.7, 1.4)
        assert entry.passed
        assert entry.value == {'h': 0.35, 'ratio': 1.2, 'closer_at_smallest_h': True}
        assert not prefactor_entry({0.5: 1.1, 0.25: 1.3}, 0.25, 0.7, 1.4).passed
        assert not prefactor_entry({0.35: None}, 0.35, 0.7, 1.4).passed

    # TC-010: 準ポテンシャル
    def test_quasipotential_entry(self):
        good = [{'forward': 4.02, 'reverse': 1e-5, 'lower_bound_ok': True}]
        assert quasipotential_entry(good, 4.0, 0.02, 1e-3).passed
        bad = [{'forward': 4.02, 'reverse': 0.1, 'lower_bound_ok': True}]
        assert not quasipotential_entry(bad, 4.0, 0.02, 1e-3).passed
        assert not quasipotential_entry([], 4.0, 0.02, 1e-3).passed

    # TC-011: スペクトル構造
    def test_spectral_structure_entry(self):
        point = {
            'h': 0.3, 'transpose_defect': 0.0, 'principal_P': {'invariants_hold': True},
            'small_eigenvalues': {'matches': True}, 'accretivity': {'passed': True}
        }
        assert spectral_structure_entry([point]).passed
        assert not spectral_structure_entry([dict(point, transpose_defect=1e-6)]).passed
        assert not spectral_structure_entry([]).passed

    # TC-012: 準モード
    def test_quasimode_entry(self):
        points = [
            {'quasimode': {'h': 0.4, 'E1_ratio': 1.4, 'E2_ratio': 0.3}},
            {'quasimode': {'h': 0.3, 'E1_ratio': 1.25, 'E2_ratio': 0.2}},
            {'quasimode': {'h': 0.25, 'E1_ratio': 1.15, 'E2_ratio': 0.1}},
            {'quasimode': None}
        ]
        entry = quasimode_entry(points, 0.2)
        assert entry.passed
        assert entry.value['h'] == [0.4, 0.3, 0.25]
        points[1]['quasimode']['E2_ratio'] = 0.05
        assert not quasimode_entry(points, 0.2).passed
