"""
Euler–Maruyama による脱出時間サンプリング

    X_{n+1} = X_n + b(X_n) dt + √(h dt) G_n

パスは開始点の内部リフト上の展開座標で進め、g(X_{n+1}) ≥ 0 になったステップで
脱出とする。脱出時刻はステップ内の交点比率 s で τ = (n + s) dt と補間する。
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..core.exceptions import PreconditionError
from ..geometry import Region, Torus
from .streams import derived_seed, path_generator

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 10 ** 7
UNRELIABLE_CENSORING = 0.01


@dataclass
class SimConfig:
    """
    シミュレーション設定

    Attributes:
        h: 温度（0 は決定論的な Euler 流れ）
        dt: 時間刻み
        max_steps: 打ち切りステップ数
        seed: 64ビットシード
        n_paths: パス数
        starts: 開始点 (k, d)。パス p は starts[p % k] から始まる
        block_size: 1ブロックのパス数（結果には影響しない）
        chunk_steps: 1回にまとめて引く乱数のステップ数（結果には影響しない）
        threads: ワーカースレッド数（結果には影響しない）
    """
    h: float
    dt: float
    n_paths: int
    starts: np.ndarray
    seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    block_size: int = 256
    chunk_steps: int = 64
    threads: int = 1

    def __post_init__(self):
        self.starts = np.atleast_2d(np.asarray(self.starts, dtype=float))
        if self.dt <= 0.0:
            raise PreconditionError(f"dt must be positive, got {self.dt}")
        if self.h < 0.0:
            raise PreconditionError(f"h must be non-negative, got {self.h}")
        if self.n_paths < 1:
            raise PreconditionError(f"n_paths must be at least 1, got {self.n_paths}")
        if self.max_steps < 1 or self.block_size < 1 or self.chunk_steps < 1:
            raise PreconditionError("max_steps, block_size and chunk_steps must be positive")

    def to_dict(self) -> dict:
        return {
            'h': self.h,
            'dt': self.dt,
            'n_paths': self.n_paths,
            'seed': self.seed,
            'max_steps': self.max_steps,
            'block_size': self.block_size,
            'chunk_steps': self.chunk_steps,
            'n_starts': int(len(self.starts)),
            'start': self.starts[0].tolist() if len(self.starts) == 1 else None
        }


@dataclass
class ExitSummary:
    """脱出時間の要約統計"""
    n_paths: int
    n_used: int
    mean: float
    variance: float
    stderr: float
    censored_fraction: float
    poisoned: int

    @property
    def reliable(self) -> bool:
        return self.censored_fraction <= UNRELIABLE_CENSORING and self.n_used > 0

    def to_dict(self) -> dict:
        return {
            'n_paths': self.n_paths,
            'n_used': self.n_used,
            'mean': self.mean,
            'variance': self.variance,
            'stderr': self.stderr,
            'censored_fraction': self.censored_fraction,
            'poisoned': self.poisoned,
            'reliable': self.reliable
        }


@dataclass
class ExitSampleSet:
    """パスごとの脱出記録"""
    tau: np.ndarray
    exit_points: np.ndarray
    steps: np.ndarray
    censored: np.ndarray
    poisoned: np.ndarray
    config: SimConfig
    hit: Optional[np.ndarray] = None   # committor 用（目標球に先に到達したか）

    @property
    def valid(self) -> np.ndarray:
        return ~(self.censored | self.poisoned)

    @property
    def exit_times(self) -> np.ndarray:
        """打ち切り・汚染パスを除いた τ"""
        return self.tau[self.valid]

    def summary(self) -> ExitSummary:
        taus = self.exit_times
        n = len(taus)
        mean = float(taus.mean()) if n else float('nan')
        variance = float(taus.var(ddof=1)) if n > 1 else float('nan')
        stderr = math.sqrt(variance / n) if n > 1 else float('nan')
        total = len(self.tau)
        censored_fraction = float(self.censored.sum()) / total if total else 0.0
        result = ExitSummary(n_paths=total, n_used=n, mean=mean, variance=variance, stderr=stderr,
                             censored_fraction=censored_fraction, poisoned=int(self.poisoned.sum()))
        if not result.reliable:
            logger.warning(f"Exit sample set unreliable: censored fraction {censored_fraction:.2%}")
        return result

    def to_dict(self) -> dict:
        return {'config': self.config.to_dict(), 'summary': self.summary().to_dict()}


@dataclass
class _BlockResult:
    tau: np.ndarray
    exit_points: np.ndarray
    steps: np.ndarray
    censored: np.ndarray
    poisoned: np.ndarray
    hit: np.ndarray


@dataclass
class _Target:
    center: np.ndarray
    radius: float


def _lift_starts(region: Region, starts: np.ndarray) -> np.ndarray:
    lifts, inside = region.lift_inside(starts)
    inside = np.atleast_1d(inside)
    if not inside.all():
        bad = starts[~inside][0].tolist()
        raise PreconditionError(f"Start point {bad} is outside the domain")
    return lifts


def _run_block(block: int, drift: Callable, region: Region, cfg: SimConfig, lifts: np.ndarray,
               target: Optional[_Target]) -> _BlockResult:
    torus = region.torus
    d = torus.dimension
    first = block * cfg.block_size
    m = min(cfg.block_size, cfg.n_paths - first)
    rows = np.arange(m)
    y = lifts[(first + rows) % len(lifts)].copy()

    tau = np.full(m, math.nan)
    exit_points = np.full((m, d), math.nan)
    steps = np.zeros(m, dtype=np.int64)
    censored = np.zeros(m, dtype=bool)
    poisoned = np.zeros(m, dtype=bool)
    hit = np.zeros(m, dtype=bool)
    active = rows.copy()

    if target is not None:
        inside_target = torus.distance(y, target.center) <= target.radius
        hit[inside_target] = True
        tau[inside_target] = 0.0
        active = active[~inside_target]

    streams = [path_generator(cfg.seed, first + i) for i in rows]
    sigma = math.sqrt(cfg.h * cfg.dt)
    noise = np.empty((cfg.chunk_steps, m, d))
    step = 0
    while len(active) and step < cfg.max_steps:
        for i in active:
            noise[:, i] = streams[i].standard_normal((cfg.chunk_steps, d))
        for j in range(cfg.chunk_steps):
            if not len(active) or step >= cfg.max_steps:
                break
            x = y[active]
            b = drift(x, strict=False)
            x_new = x + b * cfg.dt + sigma * noise[j, active]
            level = region.g.value(x_new, strict=False)
            bad = ~(np.all(np.isfinite(x_new), axis=-1) & np.isfinite(level))
            exits = ~bad & (level >= 0.0)
            step += 1

            if bad.any():
                poisoned[active[bad]] = True
                steps[active[bad]] = step
            if exits.any():
                idx = active[exits]
                crossing, s = region.bisect(x[exits], x_new[exits])
                tau[idx] = (step - 1 + s) * cfg.dt
                exit_points[idx] = torus.canonical(crossing)
                steps[idx] = step
            stay = ~(bad | exits)
            y[active[stay]] = x_new[stay]
            if target is not None and stay.any():
                reached = torus.distance(x_new[stay], target.center) <= target.radius
                if reached.any():
                    idx = active[stay][reached]
                    hit[idx] = True
                    tau[idx] = step * cfg.dt
                    steps[idx] = step
                    stay[np.flatnonzero(stay)[reached]] = False
            active = active[stay]

    if len(active):
        censored[active] = True
        tau[active] = cfg.max_steps * cfg.dt
        steps[active] = cfg.max_steps
    return _BlockResult(tau=tau, exit_points=exit_points, steps=steps,
                        censored=censored, poisoned=poisoned, hit=hit)


def _run(drift: Callable, region: Region, cfg: SimConfig, target: Optional[_Target] = None) -> ExitSampleSet:
    lifts = _lift_starts(region, cfg.starts)
    n_blocks = -(-cfg.n_paths // cfg.block_size)

    def work(block: int) -> _BlockResult:
        return _run_block(block, drift, region, cfg, lifts, target)

    if cfg.threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
            results = list(executor.map(work, range(n_blocks)))
    else:
        results = [work(block) for block in range(n_blocks)]

    samples = ExitSampleSet(
        tau=np.concatenate([r.tau for r in results]),
        exit_points=np.concatenate([r.exit_points for r in results]),
        steps=np.concatenate([r.steps for r in results]),
        censored=np.concatenate([r.censored for r in results]),
        poisoned=np.concatenate([r.poisoned for r in results]),
        config=cfg,
        hit=np.concatenate([r.hit for r in results]) if target is not None else None
    )
    if samples.poisoned.any():
        logger.warning(f"{int(samples.poisoned.sum())} path(s) aborted on non-finite drift")
    return samples


def sample_exits(drift: Callable, region: Region, cfg: SimConfig) -> ExitSampleSet:
    """
    Ω からの脱出時間をサンプリングする

    Args:
        drift: ドリフト b（Drift など、strict 引数を受け付ける呼び出し可能オブジェクト）
        region: 領域 Ω
        cfg: シミュレーション設定

    Returns:
        ExitSampleSet（パス番号順）

    Raises:
        PreconditionError: 開始点が Ω の外
    """
    samples = _run(drift, region, cfg)
    summary = samples.summary()
    logger.info(f"Sampled {cfg.n_paths} exits at h={cfg.h}: mean tau = {summary.mean:.6g} "
                f"+/- {summary.stderr:.3g} (censored {summary.censored_fraction:.2%})")
    return samples


@dataclass
class CommittorResult:
    """committor の推定値と Wilson 95% 区間"""
    probability: float
    lower: float
    upper: float
    hits: int
    n_used: int
    censored: int = 0

    def to_dict(self) -> dict:
        return {'probability': self.probability, 'interval': [self.lower, self.upper],
                'hits': self.hits, 'n_used': self.n_used, 'censored': self.censored}


def ball_inside(region: Region, center, radius: float, n_directions: int = 256, seed: int = 0) -> bool:
    """球 B(center, radius) が Ω に含まれるか（球面上の標本で判定）"""
    d = region.torus.dimension
    center = np.asarray(center, dtype=float)
    if d == 1:
        directions = np.array([[1.0], [-1.0]])
    else:
        directions = np.random.default_rng(seed).standard_normal((n_directions, d))
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    probes = np.vstack([center[None, :], center + radius * directions])
    return bool(np.all(region.contains(probes)))


def committor(drift: Callable, region: Region, center, radius: float, start, cfg: SimConfig) -> CommittorResult:
    """
    P_x[τ_B < τ_{Ω^c}] を推定する

    Args:
        drift: ドリフト
        region: 領域 Ω
        center: 目標球の中心
        radius: 目標球の半径
        start: 開始点
        cfg: シミュレーション設定（starts は start で置き換える）

    Returns:
        CommittorResult

    Raises:
        PreconditionError: 目標球が Ω に含まれない、または開始点が Ω の外
    """
    from .statistics import wilson_interval

    center = np.asarray(center, dtype=float)
    if not ball_inside(region, center, radius):
        raise PreconditionError(f"Target ball around {center.tolist()} (r={radius}) is not inside the domain")
    start = np.asarray(start, dtype=float)
    if region.torus.distance(start, center) <= radius:
        return CommittorResult(probability=1.0, lower=1.0, upper=1.0, hits=0, n_used=0)

    run_cfg = replace(cfg, starts=start[None, :])
    samples = _run(drift, region, run_cfg, _Target(center=center, radius=radius))
    used = samples.valid
    hits = int(samples.hit[used].sum())
    n = int(used.sum())
    lower, upper = wilson_interval(hits, n)
    result = CommittorResult(probability=hits / n if n else float('nan'), lower=lower, upper=upper,
                             hits=hits, n_used=n, censored=int(samples.censored.sum()))
    logger.info(f"Committor from {start.tolist()}: {result.probability:.4f} [{lower:.4f}, {upper:.4f}]")
    return result


@dataclass
class LevelingResult:
    """開始点ごとの平均脱出時間のばらつき"""
    starts: List[List[float]]
    means: List[float]
    stderrs: List[float]
    spread: float
    noise: List[float]
    tolerance: float
    passed: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            'starts': self.starts,
            'means': self.means,
            'stderrs': self.stderrs,
            'spread': self.spread,
            'noise': self.noise,
            'tolerance': self.tolerance,
            'passed': self.passed
        }


def leveling_check(drift: Callable, region: Region, cfg: SimConfig, starts: Sequence,
                   in_basin: Callable[[np.ndarray], bool], tolerance: float = 0.05) -> LevelingResult:
    """
    吸引域内の開始点で E_x[τ] が揃うかを調べる

    最初の開始点を基準 x₀ とし、各点で |E_x/E_x₀ − 1| が
    max(tolerance, 3·√((se_x/E_x)² + (se_0/E_0)²)) 以下なら合格。

    Raises:
        PreconditionError: 開始点が吸引域の外
    """
    starts = [np.asarray(s, dtype=float) for s in starts]
    for s in starts:
        if not in_basin(s):
            raise PreconditionError(f"Start point {s.tolist()} is not in the basin of attraction")

    means, stderrs = [], []
    for i, s in enumerate(starts):
        run_cfg = replace(cfg, starts=s[None, :], seed=derived_seed(cfg.seed, 'leveling', i))
        summary = sample_exits(drift, region, run_cfg).summary()
        means.append(summary.mean)
        stderrs.append(summary.stderr)

    ratios = [m / means[0] - 1.0 for m in means]
    noise = [3.0 * math.sqrt((se / m) ** 2 + (stderrs[0] / means[0]) ** 2) for m, se in zip(means, stderrs)]
    spread = float(max(abs(r) for r in ratios))
    passed = all(abs(r) <= max(tolerance, n) for r, n in zip(ratios, noise))
    logger.info(f"Leveling spread {spread:.3%} over {len(starts)} starts -> {'pass' if passed else 'FAIL'}")
    return LevelingResult(starts=[s.tolist() for s in starts], means=means, stderrs=stderrs,
                          spread=spread, noise=noise, tolerance=tolerance, passed=passed)


def simulate_ensemble(drift: Callable, torus: Torus, starts, h: float, dt: float, n_steps: int,
                      seed: int, record_every: int = 1, burn_in: int = 0) -> np.ndarray:
    """
    殺さない（トーラス全体の）Euler–Maruyama アンサンブル

    Returns:
        記録した正準座標 (n_records, n_walkers, d)
    """
    y = np.atleast_2d(np.asarray(starts, dtype=float)).copy()
    rng = path_generator(seed, 0)
    sigma = math.sqrt(h * dt)
    records = []
    for step in range(1, n_steps + 1):
        y = y + drift(y) * dt + sigma * rng.standard_normal(y.shape)
        if step > burn_in and (step - burn_in) % record_every == 0:
            records.append(torus.canonical(y))
    return np.array(records)


def simulate_trajectory(drift: Callable, torus: Torus, x0, h: float, dt: float, n_steps: int,
                        seed: int) -> np.ndarray:
    """1本の軌道（正準座標 (n_steps + 1, d)）"""
    x0 = np.asarray(x0, dtype=float)
    path = simulate_ensemble(drift, torus, x0[None, :], h, dt, n_steps, seed)
    return np.vstack([torus.canonical(x0)[None, :], path[:, 0, :]])


def start_points_from_weights(nodes: np.ndarray, weights: np.ndarray, n: int, seed: int) -> np.ndarray:
    """離散分布（格子上の重み）から開始点を引く"""
    weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    total = weights.sum()
    if not total > 0.0:
        raise PreconditionError("Start distribution has no positive mass")
    rng = np.random.default_rng(derived_seed(seed, 'starts'))
    idx = rng.choice(len(nodes), size=n, p=weights / total)
    return nodes[idx]

