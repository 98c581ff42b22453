"""
陰関数領域 Ω = {g < 0}

g はチャート座標（トーラスの展開座標）で書かれてよい。点 x が Ω に属するのは、
chart(x) の隣接リフト chart(x) + L·k（k ∈ {−1,0,1}^d）のいずれかで g < 0 となる
ときである。|g| ≤ MEMBERSHIP_TOL のリフトは境界上とみなす（sin(π) の丸め誤差は
内部に数えない）。軌道の追跡はそのリフト上の展開座標で行い、g ≥ 0 になった時点を
領域からの脱出とみなす。
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from ..core.exceptions import EmptyBoundaryError
from ..fields import ScalarField
from .torus import Torus

logger = logging.getLogger(__name__)

BISECTION_TOL = 1e-10
# g < −MEMBERSHIP_TOL を内部とする。二分法の交点は隣のリフトでも |g| ≤ MEMBERSHIP_TOL に収まる
MEMBERSHIP_TOL = 10.0 * BISECTION_TOL
MAX_BISECTIONS = 200


@dataclass
class BoundaryPoint:
    """境界上の点"""
    z: np.ndarray              # 正準代表 [0, L)^d
    lift: np.ndarray           # g = 0 となる展開座標
    normal: np.ndarray         # 外向き単位法線 ∇g/|∇g|
    f_value: float
    grad_norm: float = 0.0     # |∇f(z)|
    sides: int = 1             # Ω が z に接している側の数

    def to_dict(self) -> dict:
        return {
            'z': self.z.tolist(),
            'normal': self.normal.tolist(),
            'f': self.f_value,
            'grad_norm': self.grad_norm,
            'sides': self.sides
        }


@dataclass
class BoundaryScan:
    """境界走査の結果"""
    points: np.ndarray                   # 二分法で得た境界点（展開座標）
    normals: np.ndarray
    f_values: np.ndarray
    f_min: float                         # min_{∂Ω} f の推定値
    minimizers: List[BoundaryPoint] = field(default_factory=list)
    chords: int = 0


class Region:
    """トーラス上の陰関数領域"""

    def __init__(self, g: ScalarField, torus: Torus):
        """
        初期化

        Args:
            g: 領域関数（Ω = {g < 0}）
            torus: トーラス
        """
        if g.dimension != torus.dimension:
            raise ValueError("Region function dimension does not match the torus")
        self.g = g
        self.torus = torus
        self._offsets = torus.lift_offsets()

    # --- 点の問い合わせ ---------------------------------------------------

    def level(self, y) -> np.ndarray:
        """展開座標での g(y)"""
        return self.g.value(y)

    def lift_inside(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """
        g が最小となるリフトを返す

        Returns:
            (リフト (..., d), 内部判定 (...))
        """
        x = np.asarray(x, dtype=float)
        lifts = self.torus.chart(x)[..., None, :] + self._offsets
        values = self.g.value(lifts)
        best = np.asarray(np.argmin(values, axis=-1))
        chosen = np.take_along_axis(lifts, best[..., None, None], axis=-2)[..., 0, :]
        inside = np.take_along_axis(values, best[..., None], axis=-1)[..., 0] < -MEMBERSHIP_TOL
        return chosen, inside

    def contains(self, x) -> np.ndarray:
        """x ∈ Ω か（境界と |g| ≤ MEMBERSHIP_TOL の点は含まない）"""
        _, inside = self.lift_inside(x)
        return inside if inside.ndim else bool(inside)

    def outward_normal(self, y) -> np.ndarray:
        """展開座標 y での外向き単位法線"""
        grad = self.g.gradient(y)
        norm = np.linalg.norm(grad, axis=-1, keepdims=True)
        return grad / np.where(norm > 0.0, norm, 1.0)

    def boundary_sides(self, y, eps: Optional[float] = None) -> int:
        """境界点 y（展開座標）に Ω が何側から接しているか（0〜2）"""
        eps = 1e-6 * self.torus.period if eps is None else eps
        n = self.outward_normal(y)
        return int(bool(self.contains(y - eps * n))) + int(bool(self.contains(y + eps * n)))

    # --- 交差判定 ---------------------------------------------------------

    def bisect(self, y_in: np.ndarray, y_out: np.ndarray,
               tol: float = BISECTION_TOL) -> Tuple[np.ndarray, np.ndarray]:
        """
        g(y_in) < 0 ≤ g(y_out) の線分上で g = 0 の点を二分法で求める

        Args:
            y_in: 形状 (m, d) の内側端点
            y_out: 形状 (m, d) の外側端点
            tol: |g| の許容値

        Returns:
            (交点 (m, d), y_in から測った線分上の比率 s (m,))
        """
        lo = np.zeros(len(y_in))
        hi = np.ones(len(y_in))
        step = y_out - y_in
        s = hi.copy()
        for _ in range(MAX_BISECTIONS):
            s = 0.5 * (lo + hi)
            values = self.level(y_in + s[:, None] * step)
            # 止まった行は他の行の反復に影響されない
            done = (np.abs(values) <= tol) | (hi - lo < 1e-16)
            if np.all(done):
                break
            outside = values >= 0.0
            hi = np.where(done, hi, np.where(outside, s, hi))
            lo = np.where(done, lo, np.where(outside, lo, s))
        return y_in + s[:, None] * step, s

    def first_crossing(self, x_prev, x_next) -> Optional[np.ndarray]:
        """
        x_prev → x_next の最小像線分が ∂Ω を横切れば交点を返す

        交点は x_prev の内部リフト上の展開座標で返す（|g| ≤ 1e-10）。
        """
        y_prev, inside = self.lift_inside(x_prev)
        if not inside:
            raise ValueError("first_crossing requires x_prev inside the region")
        y_next = y_prev + self.torus.minimage(np.asarray(x_next, dtype=float) - np.asarray(x_prev, dtype=float))
        if self.level(y_next) < 0.0:
            return None
        point, _ = self.bisect(y_prev[None, :], y_next[None, :])
        return point[0]

    # --- 境界走査 ---------------------------------------------------------

    def boundary_hessian_det(self, f: ScalarField, y: np.ndarray) -> float:
        """
        境界に制限した f のヘッセ行列の行列式

        接平面への射影 T (Hess f − λ Hess g) Tᵀ、λ = ∇f·∇g / |∇g|²。
        d = 1 では 1 を返す。
        """
        d = self.torus.dimension
        if d == 1:
            return 1.0
        grad_g = self.g.gradient(y)
        grad_f = f.gradient(y)
        norm2 = float(grad_g @ grad_g)
        if norm2 == 0.0:
            return float('nan')
        lam = float(grad_f @ grad_g) / norm2
        K = f.hessian(y) - lam * self.g.hessian(y)
        T = null_space(grad_g[None, :])
        return float(np.linalg.det(T.T @ K @ T))

    def _refine(self, f: ScalarField, seed: np.ndarray) -> np.ndarray:
        """SLSQP で g = 0 上の f を極小化し、ラグランジュ・ニュートン法で仕上げる"""
        constraint = {'type': 'eq', 'fun': lambda y: float(self.g.value(y)),
                      'jac': lambda y: self.g.gradient(y)}
        result = minimize(lambda y: float(f.value(y)), seed, jac=lambda y: f.gradient(y),
                          method='SLSQP', constraints=[constraint],
                          options={'ftol': 1e-14, 'maxiter': 200})
        y = result.x if np.all(np.isfinite(result.x)) else seed
        return self._lagrange_newton(f, y)

    def _lagrange_newton(self, f: ScalarField, y: np.ndarray, iterations: int = 20) -> np.ndarray:
        d = self.torus.dimension

        def residual(y, lam):
            return np.concatenate([f.gradient(y) - lam * self.g.gradient(y), [self.g.value(y)]])

        grad_g = self.g.gradient(y)
        norm2 = float(grad_g @ grad_g)
        if norm2 == 0.0:
            return y
        lam = float(f.gradient(y) @ grad_g) / norm2
        r = residual(y, lam)
        for _ in range(iterations):
            if np.linalg.norm(r) <= 1e-13:
                break
            grad_g = self.g.gradient(y)
            J = np.zeros((d + 1, d + 1))
            J[:d, :d] = f.hessian(y) - lam * self.g.hessian(y)
            J[:d, d] = -grad_g
            J[d, :d] = grad_g
            try:
                delta = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                break
            y_new, lam_new = y + delta[:d], lam + delta[d]
            r_new = residual(y_new, lam_new)
            if not np.linalg.norm(r_new) < np.linalg.norm(r):
                break
            y, lam, r = y_new, lam_new, r_new
        return y

    def boundary_scan(self, f: ScalarField, n_samples: int, seed: int = 0,
                      tol_cluster: float = 1e-8, max_refine: int = 16) -> BoundaryScan:
        """
        ランダムな弦の二分法で境界点を集め、f の境界最小点を求める

        Args:
            f: ポテンシャル
            n_samples: 求める境界点の数
            seed: 乱数シード
            tol_cluster: 最小値からの相対許容（f のスケール倍）
            max_refine: 制約付き最適化で仕上げる候補数の上限

        Returns:
            BoundaryScan
        """
        rng = np.random.default_rng(seed)
        L = self.torus.period
        d = self.torus.dimension
        lower = self.torus.offset - 0.5 * L

        # 展開座標の箱 [c − L/2, c + 3L/2)^d で符号の異なる点を集める
        cloud = lower + 2.0 * L * rng.random((20 * n_samples, d))
        values = self.level(cloud)
        inner = cloud[values < 0.0]
        outer = cloud[values > 0.0]
        n_chords = 10 * n_samples
        if len(inner) == 0 or len(outer) == 0:
            raise EmptyBoundaryError(f"No sign change of g found in {n_chords} chords")

        y_in = inner[rng.integers(len(inner), size=n_chords)]
        y_out = outer[rng.integers(len(outer), size=n_chords)]
        points, _ = self.bisect(y_in, y_out)
        ok = np.abs(self.level(points)) <= BISECTION_TOL
        points = points[ok]
        # 他のリフトで内部になる零点は境界ではない
        points = points[~np.asarray(self.contains(points), dtype=bool)]
        if len(points) == 0:
            raise EmptyBoundaryError(f"No boundary point found in {n_chords} chords")
        if len(points) < n_samples:
            logger.warning(f"Boundary scan found only {len(points)} of {n_samples} requested points")
        points = points[:max(n_samples, 1)]

        grad_norm = np.linalg.norm(self.g.gradient(points), axis=-1)
        if np.any(grad_norm == 0.0):
            logger.warning("Vanishing |grad g| at sampled boundary points (corner or cusp)")
        normals = self.outward_normal(points)
        f_values = f.value(points)

        refined = [self._refine(f, seed_point) for seed_point in self._seeds(points, f_values, max_refine)]
        refined = [y for y in refined
                   if np.all(np.isfinite(y)) and abs(float(self.level(y))) <= 1e-8
                   and not self.contains(y)]
        candidates = refined if refined else list(points[np.argsort(f_values)[:1]])
        candidate_f = np.array([float(f.value(y)) for y in candidates])
        f_min = float(min(candidate_f.min(), f_values.min()))

        scale = max(1.0, float(np.abs(f_values).max()))
        minimizers: List[BoundaryPoint] = []
        for idx in np.argsort(candidate_f, kind='stable'):
            if candidate_f[idx] > f_min + tol_cluster * scale:
                continue
            y = np.asarray(candidates[idx], dtype=float)
            z = self.torus.canonical(y)
            if any(self.torus.distance(z, m.z) <= 1e-6 * L for m in minimizers):
                continue
            minimizers.append(BoundaryPoint(
                z=z, lift=y, normal=self.outward_normal(y), f_value=float(candidate_f[idx]),
                grad_norm=float(np.linalg.norm(f.gradient(y))), sides=self.boundary_sides(y)
            ))
        minimizers.sort(key=lambda m: tuple(m.z))
        logger.info(f"Boundary scan: {len(points)} points, min f = {f_min:.12g}, "
                    f"{len(minimizers)} minimizer(s)")
        return BoundaryScan(points=points, normals=normals, f_values=f_values,
                            f_min=f_min, minimizers=minimizers, chords=n_chords)

    def _seeds(self, points: np.ndarray, f_values: np.ndarray, limit: int) -> List[np.ndarray]:
        """f の低い順に、互いに 0.05L 以上離れた候補を選ぶ"""
        radius = 0.05 * self.torus.period
        seeds: List[np.ndarray] = []
        for idx in np.argsort(f_values, kind='stable'):
            p = points[idx]
            if all(self.torus.distance(p, q) > radius for q in seeds):
                seeds.append(p)
                if len(seeds) >= limit:
                    break
        return seeds
