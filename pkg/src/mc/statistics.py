"""
脱出時間の統計処理
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ..core.exceptions import InsufficientSamplesError, PreconditionError
from ..geometry import Torus
from .sampler import ExitSampleSet

logger = logging.getLogger(__name__)

MIN_EXIT_LAW_SAMPLES = 100
MIN_ARRHENIUS_POINTS = 3


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    """二項比率の Wilson スコア区間"""
    if n <= 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    # 0 件と全件では端点を厳密に 0, 1 とする
    lower = 0.0 if successes == 0 else max(0.0, centre - half)
    upper = 1.0 if successes == n else min(1.0, centre + half)
    return lower, upper


@dataclass
class ExitLawResult:
    """λτ と Exp(1) の Kolmogorov–Smirnov 比較"""
    statistic: float
    p_value: float
    n: int
    rate: float
    level: float

    @property
    def passed(self) -> bool:
        return self.p_value >= self.level

    def to_dict(self) -> dict:
        return {'ks_distance': self.statistic, 'p_value': self.p_value, 'n': self.n,
                'rate': self.rate, 'level': self.level, 'passed': self.passed}


def exit_law_test(samples: Union[ExitSampleSet, Sequence[float], np.ndarray], rate: float,
                  level: float = 0.05) -> ExitLawResult:
    """
    脱出時刻の分布が指数分布に従うかを検定する

    Args:
        samples: ExitSampleSet または脱出時刻の列（打ち切りは除外済みとみなす）
        rate: 比較する率 λ
        level: 有意水準

    Returns:
        ExitLawResult（漸近 KS p 値）

    Raises:
        InsufficientSamplesError: 有効サンプルが 100 未満
    """
    if isinstance(samples, ExitSampleSet):
        taus = samples.exit_times
    else:
        taus = np.asarray(samples, dtype=float)
    if len(taus) < MIN_EXIT_LAW_SAMPLES:
        raise InsufficientSamplesError(
            f"Exit law test needs at least {MIN_EXIT_LAW_SAMPLES} uncensored samples, got {len(taus)}"
        )
    if not rate > 0.0:
        raise PreconditionError(f"Rate must be positive, got {rate}")
    result = stats.kstest(rate * taus, 'expon', method='asymp')
    outcome = ExitLawResult(statistic=float(result.statistic), p_value=float(result.pvalue),
                            n=len(taus), rate=rate, level=level)
    logger.info(f"Exit law: KS distance {outcome.statistic:.4f}, p={outcome.p_value:.3g} "
                f"over {outcome.n} samples -> {'pass' if outcome.passed else 'FAIL'}")
    return outcome


@dataclass
class ArrheniusFit:
    """ln E[τ] ≈ (2Δ)/h + c の最小二乗当てはめ"""
    slope: float        # 2Δ の推定値
    intercept: float    # c（前因子の対数）
    h_values: list
    means: list

    @property
    def prefactor(self) -> float:
        return math.exp(self.intercept)

    def to_dict(self) -> dict:
        return {'two_delta': self.slope, 'intercept': self.intercept, 'prefactor': self.prefactor,
                'h_values': self.h_values, 'means': self.means}


def arrhenius_fit(means: Sequence[Tuple[float, float]]) -> ArrheniusFit:
    """
    (h, E[τ]) の列からアレニウス指数を推定する

    Raises:
        InsufficientSamplesError: 異なる h が 3 個未満
    """
    pairs = [(float(h), float(m)) for h, m in means if m is not None and math.isfinite(m) and m > 0.0]
    if len({h for h, _ in pairs}) < MIN_ARRHENIUS_POINTS:
        raise InsufficientSamplesError(
            f"Arrhenius fit needs at least {MIN_ARRHENIUS_POINTS} distinct h values, got {len(pairs)} point(s)"
        )
    h = np.array([p[0] for p in pairs])
    m = np.array([p[1] for p in pairs])
    slope, intercept = np.polyfit(1.0 / h, np.log(m), 1)
    fit = ArrheniusFit(slope=float(slope), intercept=float(intercept),
                       h_values=h.tolist(), means=m.tolist())
    logger.info(f"Arrhenius fit over {len(pairs)} points: 2*Delta = {fit.slope:.6g}")
    return fit


@dataclass
class GibbsHistogramResult:
    """トーラス上の時間平均ヒストグラムとギブス測度の比較"""
    total_variation: float
    chi2: float
    dof: int
    bins: int
    n_samples: int

    def to_dict(self) -> dict:
        return {'total_variation': self.total_variation, 'chi2': self.chi2, 'dof': self.dof,
                'bins': self.bins, 'n_samples': self.n_samples}


def gibbs_weights(f, torus: Torus, h: float, bins: int = 16, sub: int = 8) -> np.ndarray:
    """各ビンの e^{−2f/h} 質量（ビン内の中点則、正規化済み）"""
    d = torus.dimension
    n = bins * sub
    axis = torus.grid_axis(n) + 0.5 * torus.period / n
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing='ij'), axis=-1)
    values = f.value(mesh)
    density = np.exp(-2.0 * (values - values.min()) / h)
    shape = []
    for _ in range(d):
        shape.extend([bins, sub])
    mass = density.reshape(shape).sum(axis=tuple(range(1, 2 * d, 2)))
    return mass / mass.sum()


def gibbs_histogram_test(points: np.ndarray, f, torus: Torus, h: float, bins: int = 16,
                         sub: int = 8) -> GibbsHistogramResult:
    """
    サンプル点のヒストグラムを e^{−2f/h} の重みと比較する

    Args:
        points: 正準座標の点列 (..., d)
        f: ポテンシャル
        torus: トーラス
        h: 温度
        bins: 1軸あたりのビン数

    Returns:
        GibbsHistogramResult（全変動距離とピアソン χ²）
    """
    d = torus.dimension
    pts = torus.canonical(np.asarray(points, dtype=float).reshape(-1, d))
    if not len(pts):
        raise InsufficientSamplesError("Gibbs histogram test needs at least one sample")
    edges = [torus.period * np.linspace(0.0, 1.0, bins + 1)] * d
    counts, _ = np.histogramdd(pts, bins=edges)
    expected = gibbs_weights(f, torus, h, bins, sub)
    observed = counts / counts.sum()
    tv = 0.5 * float(np.abs(observed - expected).sum())
    n = len(pts)
    mask = expected > 0.0
    chi2 = float(np.sum((counts[mask] - n * expected[mask]) ** 2 / (n * expected[mask])))
    result = GibbsHistogramResult(total_variation=tv, chi2=chi2, dof=int(mask.sum()) - 1,
                                  bins=bins, n_samples=n)
    logger.info(f"Gibbs histogram: TV={tv:.4f}, chi2={chi2:.1f} on {result.dof} dof")
    return result


def dt_robustness(coarse: ExitSampleSet, fine: ExitSampleSet, n_sigma: float = 2.0) -> Optional[dict]:
    """dt と dt/2 の平均脱出時間の差が n_sigma 標準誤差以内か"""
    a, b = coarse.summary(), fine.summary()
    if a.n_used < 2 or b.n_used < 2:
        return None
    combined = math.sqrt(a.stderr ** 2 + b.stderr ** 2)
    difference = abs(a.mean - b.mean)
    return {'mean_dt': a.mean, 'mean_half_dt': b.mean, 'difference': difference,
            'combined_stderr': combined, 'passed': difference <= n_sigma * combined}
