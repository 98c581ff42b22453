"""
JSON レポートと合否台帳

レポートは設定だけで決まる（スレッド数・ログ設定・計測時間は含めない）。
キーは整列して書き出すので、同じ設定からは同じバイト列が得られる。
"""

import json
import math
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class LedgerEntry:
    """受け入れ基準1件の判定"""
    criterion: str
    value: Any
    threshold: Any
    passed: bool

    def to_dict(self) -> dict:
        return {'criterion': self.criterion, 'value': self.value, 'threshold': self.threshold,
                'pass': bool(self.passed)}


def provenance(module: str, seed: Optional[int] = None, grid: Optional[int] = None,
               h: Optional[float] = None) -> dict:
    """結果レコードの由来"""
    return {'module': module, 'seed': seed, 'grid': grid, 'h': h}


def to_jsonable(value: Any) -> Any:
    """
    numpy 型を JSON に載る型へ変換する

    有限でない浮動小数点数は null にする。
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, complex):
        return {'real': to_jsonable(value.real), 'imag': to_jsonable(value.imag)}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def build_report(command: str, config, sections: Dict[str, Any],
                 ledger: Sequence[LedgerEntry] = ()) -> dict:
    """
    レポートの辞書を組み立てる

    Args:
        command: サブコマンド名
        config: ConfigManager
        sections: コマンドごとの結果
        ledger: 受け入れ台帳

    Returns:
        JSON 化可能な辞書
    """
    report = {
        'schema': SCHEMA_VERSION,
        'command': command,
        'config': config.semantic_dict(),
        'config_hash': config.content_hash()
    }
    report.update(sections)
    if ledger:
        report['ledger'] = [entry.to_dict() for entry in ledger]
        report['ledger_passed'] = all(entry.passed for entry in ledger)
    return to_jsonable(report)


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + '\n'


def write_report(report: dict, out: Optional[Union[str, Path]] = None) -> None:
    """
    レポートを書き出す（out が None なら標準出力）

    Args:
        report: build_report の結果
        out: 出力先パス
    """
    text = dumps(report)
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    logger.info(f"Report written to {path}")


# --- 台帳 -----------------------------------------------------------------

def _relative(value: Optional[float], reference: float) -> Optional[float]:
    if value is None or not math.isfinite(value) or reference == 0.0:
        return None
    return abs(value - reference) / abs(reference)


def arrhenius_entry(slope: Optional[float], two_delta: float, rel: float) -> LedgerEntry:
    """ln E[τ] の 1/h に対する傾きが 2Δ に近いか"""
    error = _relative(slope, two_delta)
    return LedgerEntry('arrhenius_slope', {'slope': slope, 'two_delta': two_delta, 'relative_error': error},
                       {'relative': rel}, error is not None and error <= rel)


def qsd_entry(product: Optional[float], low: float, high: float) -> LedgerEntry:
    """λ₁^L · E[τ] が窓に入るか"""
    passed = product is not None and math.isfinite(product) and low <= product <= high
    return LedgerEntry('qsd_identity', product, [low, high], passed)


def exit_law_entry(p_value: Optional[float], level: float) -> LedgerEntry:
    passed = p_value is not None and p_value >= level
    return LedgerEntry('exponential_exit_law', p_value, {'level': level}, passed)


def leveling_entry(spread: float, passed: bool, rel: float) -> LedgerEntry:
    return LedgerEntry('leveling', spread, {'relative': rel, 'or': '3 standard errors'}, passed)


def prefactor_entry(ratios: Dict[float, float], target_h: float, low: float, high: float) -> LedgerEntry:
    """
    目標温度での E[τ] / 予測値が窓に入り、最小の h で最大の h より 1 に近いか
    """
    finite = {h: r for h, r in ratios.items() if r is not None and math.isfinite(r)}
    if not finite:
        return LedgerEntry('sharp_prefactor', None, [low, high], False)
    h_star = min(finite, key=lambda h: abs(h - target_h))
    in_window = low <= finite[h_star] <= high
    trend = None
    if len(finite) >= 2:
        trend = abs(finite[min(finite)] - 1.0) < abs(finite[max(finite)] - 1.0)
    value = {'h': h_star, 'ratio': finite[h_star], 'closer_at_smallest_h': trend}
    return LedgerEntry('sharp_prefactor', value, [low, high], in_window and trend is not False)


def quasipotential_entry(values: List[dict], two_delta: float, rel: float, reverse_max: float) -> LedgerEntry:
    """
    鞍点への V が 2Δ に一致し、逆向きの作用がほぼ 0 で、下界を満たすか

    Args:
        values: {'forward', 'reverse', 'lower_bound_ok'} のリスト（case 2 の境界点のみ）
    """
    if not values:
        return LedgerEntry('quasi_potential', None, {'relative': rel, 'reverse_max': reverse_max}, False)
    errors = [_relative(v['forward'], two_delta) for v in values]
    passed = all(e is not None and e <= rel for e in errors) \
        and all(v['reverse'] <= reverse_max for v in values) \
        and all(v['lower_bound_ok'] for v in values)
    value = {'forward': [v['forward'] for v in values], 'reverse': [v['reverse'] for v in values],
             'two_delta': two_delta}
    return LedgerEntry('quasi_potential', value, {'relative': rel, 'reverse_max': reverse_max}, passed)


def spectral_structure_entry(points: List[dict]) -> LedgerEntry:
    """転置双対性、主固有対の不変量、小固有値の個数、数値域の非負性"""
    checks = []
    for point in points:
        checks.append({
            'h': point['h'],
            'transpose': point['transpose_defect'] <= 1e-12,
            'principal': point['principal_P']['invariants_hold'],
            'count': point['small_eigenvalues']['matches'] is not False,
            'accretive': point['accretivity']['passed']
        })
    passed = bool(checks) and all(all(v for k, v in c.items() if k != 'h') for c in checks)
    return LedgerEntry('spectral_structure', checks, {'transpose_defect': 1e-12}, passed)


def quasimode_entry(points: List[dict], rel: float) -> LedgerEntry:
    """最小の h で E1 が予測の rel 以内、ずれと E2 比が h とともに単調減少するか"""
    reports = sorted((p['quasimode'] for p in points if p.get('quasimode')), key=lambda q: -q['h'])
    if not reports:
        return LedgerEntry('quasimode', None, {'relative': rel}, False)
    gaps = [abs(q['E1_ratio'] - 1.0) if q['E1_ratio'] is not None else math.inf for q in reports]
    e2 = [q['E2_ratio'] for q in reports]
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:])) and all(b < a for a, b in zip(e2, e2[1:]))
    value = {'h': [q['h'] for q in reports], 'relative_gap': gaps, 'E2_ratio': e2}
    return LedgerEntry('quasimode', value, {'relative': rel}, gaps[-1] <= rel and decreasing)
