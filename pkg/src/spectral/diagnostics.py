"""
固有関数の集中・準モードのレイリー商・格子上の平均脱出時間などの診断
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.csgraph import connected_components

from ..core.exceptions import FactorizationError, PreconditionError, QuasimodeError
from ..geometry import Region
from .eigen import principal_eig
from .grid import GridOperator

logger = logging.getLogger(__name__)

PROFILE_SAMPLES = 4001
ACCRETIVITY_TOL = 1e-10


def smooth_step(t) -> np.ndarray:
    """0 (t ≤ 0) から 1 (t ≥ 1) への C^∞ 遷移（e^{−1/t} で構成）"""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        a = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def sublevel_component(operator: GridOperator, level: float, seed_node: Optional[int] = None) -> np.ndarray:
    """{f < level} の内部節点のうち、seed_node（既定は f 最小の節点）を含む連結成分"""
    below = operator.f_values < level
    if seed_node is None:
        seed_node = int(np.argmin(operator.f_values))
    if not below[seed_node]:
        return np.zeros(operator.size, dtype=bool)
    adjacency = operator.neighbours()
    keep = np.flatnonzero(below)
    _, labels = connected_components(adjacency[keep][:, keep], directed=False)
    component = np.zeros(operator.size, dtype=bool)
    component[keep[labels == labels[np.searchsorted(keep, seed_node)]]] = True
    return component


@dataclass
class ConcentrationReport:
    """主固有ベクトルと u_η の比較"""
    distance: float
    mass_ratio: float
    eta: float
    h: float
    nodes_in_sublevel: int

    def to_dict(self) -> dict:
        return {'distance': self.distance, 'mass_ratio': self.mass_ratio, 'eta': self.eta,
                'h': self.h, 'nodes_in_sublevel': self.nodes_in_sublevel}


def comparison_vector(operator: GridOperator, boundary_min: float, eta: float) -> np.ndarray:
    """u_η ∝ χ_η e^{−f/h}（ℓ² 正規化）"""
    f = operator.f_values
    half = sublevel_component(operator, boundary_min - 0.5 * eta)
    chi = smooth_step((boundary_min - 0.5 * eta - f) / (0.5 * eta)) * half
    u = chi * np.exp(-(f - f.min()) / operator.h)
    return u / np.linalg.norm(u)


def eigenfunction_concentration(vector: np.ndarray, operator: GridOperator, f_x0: float,
                                boundary_min: float, eta: float) -> ConcentrationReport:
    """
    主固有ベクトルが χ_η e^{−f/h} に集中しているか

    Args:
        vector: P（または P*）の主固有ベクトル
        operator: その格子作用素
        f_x0: 極小値 f(x₀)
        boundary_min: min_{∂Ω} f
        eta: 0 < η < Δ

    Returns:
        ConcentrationReport（‖v − u_η‖₂ と C_min(η) 上の質量比）

    Raises:
        PreconditionError: η が範囲外、または C_min(η) が格子上で空
    """
    barrier = boundary_min - f_x0
    if not 0.0 < eta < barrier:
        raise PreconditionError(f"eta must lie in (0, {barrier:.6g}), got {eta}")
    core = sublevel_component(operator, boundary_min - eta)
    if not core.any():
        raise PreconditionError(f"Sublevel set C_min(eta) is empty on the grid (eta={eta})")
    u = comparison_vector(operator, boundary_min, eta)
    v = np.real(np.asarray(vector))
    v = v / np.linalg.norm(v)
    if v @ u < 0.0:
        v = -v
    report = ConcentrationReport(
        distance=float(np.linalg.norm(v - u)),
        mass_ratio=float(np.sum(v[core] ** 2)),
        eta=eta, h=operator.h, nodes_in_sublevel=int(core.sum())
    )
    logger.info(f"Concentration at h={operator.h}: |v - u_eta| = {report.distance:.4g}, "
                f"mass ratio {report.mass_ratio:.6f}")
    return report


def quadratic_form(operator: GridOperator, phi: np.ndarray) -> float:
    """⟨A φ, φ⟩ の格子求積（Δx^d Σ）"""
    return float(operator.spacing ** operator.dimension * (phi @ (operator.matrix @ phi)))


def dirichlet_energy(operator: GridOperator, phi: np.ndarray) -> float:
    """∫|∇φ|² の格子求積（外部節点では φ = 0）"""
    total = 0.0
    grid = operator.to_grid(phi)
    for k in range(operator.dimension):
        forward = np.roll(grid, -1, axis=k)
        forward_mask = np.roll(operator.mask, -1, axis=k)
        edges = operator.mask | forward_mask
        total += float(np.sum((grid[edges] - forward[edges]) ** 2))
    return total * operator.spacing ** (operator.dimension - 2)


@dataclass
class BoundaryProfile:
    """境界最小点 z での1次元プロファイル"""
    z: np.ndarray
    case: int
    rate: float            # case 1: ∂_n f(z)、case 2: |μ(z)|
    t: np.ndarray
    values: np.ndarray

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return np.interp(v, self.t, self.values, left=0.0, right=1.0)


def boundary_profile(z: np.ndarray, case: int, rate: float, h: float, delta: float) -> BoundaryProfile:
    """
    ∫_0^v χ(t) w(t) dt を正規化したプロファイル

    case 1 は w(t) = e^{−2 ∂_n f(z) t/h}、case 2 は w(t) = e^{−|μ(z)| t²/h}。
    χ は t ≤ δ/2 で 1、t ≥ δ で 0。
    """
    t = np.linspace(0.0, delta, PROFILE_SAMPLES)
    chi = 1.0 - smooth_step((t - 0.5 * delta) / (0.5 * delta))
    if case == 1:
        weight = np.exp(-2.0 * rate * t / h)
    else:
        weight = np.exp(-rate * t * t / h)
    cumulative = cumulative_trapezoid(chi * weight, t, initial=0.0)
    return BoundaryProfile(z=np.asarray(z, dtype=float), case=case, rate=rate, t=t,
                           values=cumulative / cumulative[-1])


@dataclass
class QuasimodeReport:
    """準モード φ_{1,h} e^{−f/h} のレイリー診断"""
    h: float
    e1: float
    predicted: Optional[float]
    e2_ratio: float
    e3_ratio: float
    norm_p: float
    norm_p_adjoint: float
    strip_margin: float
    c_low_defect: float
    delta: float
    eps: float

    @property
    def e1_ratio(self) -> Optional[float]:
        if not self.predicted:
            return None
        return self.e1 / self.predicted

    def to_dict(self) -> dict:
        return {
            'h': self.h,
            'E1': self.e1,
            'E1_predicted': self.predicted,
            'E1_ratio': self.e1_ratio,
            'E2_ratio': self.e2_ratio,
            'E3_ratio': self.e3_ratio,
            'norm_P_f1_sq': self.norm_p,
            'norm_Pstar_f1_sq': self.norm_p_adjoint,
            'strip_margin': self.strip_margin,
            'c_low_defect': self.c_low_defect,
            'delta': self.delta,
            'eps': self.eps
        }


def quasimode_vector(operator: GridOperator, region: Region, records: Sequence, delta: float,
                     boundary_min: Optional[float] = None, eps: float = 0.0) -> np.ndarray:
    """
    格子上の φ_{1,h}

    ∂Ω から符号付き距離 v ≈ −g/|∇g| が δ 未満の帯で φ を 0 へ落とす。境界最小点 z から
    距離 δ 以内では z のプロファイル、2δ 以上離れると smooth_step(v/δ) を使い、その間は
    滑らかにつなぐ。boundary_min と eps を渡すと C_low = {f < boundary_min − eps} 上で φ = 1 とし、
    z のプロファイルの台を C_low の手前までに縮める。

    Raises:
        QuasimodeError: 帯が領域全体を覆う、または境界最小点がない
    """
    if not records:
        raise QuasimodeError("Quasimode needs at least one boundary minimizer")
    torus = region.torus
    lifts, _ = region.lift_inside(operator.nodes)
    grad = region.g.gradient(lifts)
    v = -region.g.value(lifts) / np.maximum(np.linalg.norm(grad, axis=-1), np.finfo(float).tiny)
    if delta >= float(v.max()):
        raise QuasimodeError(f"Profile collar of width {delta:.4g} covers the whole domain "
                             f"(max boundary distance {float(v.max()):.4g})")

    distances = np.stack([torus.distance(operator.nodes, record.point.z) for record in records], axis=-1)
    nearest = np.argmin(distances, axis=-1)
    # z の近傍で 1、2δ より外で 0
    theta = 1.0 - smooth_step((distances[np.arange(operator.size), nearest] - delta) / delta)
    c_low = np.zeros(operator.size, dtype=bool)
    if boundary_min is not None and eps > 0.0:
        c_low = operator.f_values < boundary_min - eps

    phi = smooth_step(v / delta)
    for k, record in enumerate(records):
        sel = (nearest == k) & (theta > 0.0)
        width = delta
        if np.any(sel & c_low):
            width = min(delta, float(v[sel & c_low].min()))
        if record.case == 1:
            rate = float(record.normal_derivative)
        else:
            rate = abs(float(record.saddle.mu))
        profile = boundary_profile(record.point.z, record.case, rate, operator.h, width)
        phi[sel] = theta[sel] * profile(v[sel]) + (1.0 - theta[sel]) * phi[sel]
        if width < delta:
            logger.debug(f"Profile at {np.round(record.point.z, 6).tolist()} shortened to {width:.4g}")
    if c_low.any():
        core = smooth_step((boundary_min - 0.5 * eps - operator.f_values) / (0.5 * eps))
        phi = np.maximum(phi, core)
    return phi


def quasimode_rayleigh(operator: GridOperator, region: Region, records: Sequence, f_x0: float,
                       boundary_min: float, delta: float, eps_rel: float = 0.1,
                       predicted: Optional[float] = None) -> QuasimodeReport:
    """
    ⟨P f₁, f₁⟩, ‖P f₁‖², ‖P* f₁‖² を格子求積で評価する

    Args:
        operator: P の格子作用素
        region: 領域 Ω
        records: (Normal) 判定の BoundaryRecord 列
        f_x0: f(x₀)
        boundary_min: min_{∂Ω} f
        delta: 境界帯の幅 δ₁
        eps_rel: ε₋ = eps_rel·Δ
        predicted: 比較する (κ₁^P h^{1/2} + κ₂^P h) e^{−2Δ/h}

    Returns:
        QuasimodeReport
    """
    if operator.tag != 'P':
        raise PreconditionError(f"quasimode_rayleigh requires a P operator, got {operator.tag}")
    h = operator.h
    f = operator.f_values
    eps = eps_rel * (boundary_min - f_x0)
    phi = quasimode_vector(operator, region, records, delta, boundary_min=boundary_min, eps=eps)
    f1 = phi * np.exp(-(f - f.min()) / h)
    f1 = f1 / np.linalg.norm(f1)

    A = operator.matrix
    Pf = A @ f1
    Psf = A.T @ f1
    e1 = float(f1 @ Pf)
    norm_p = float(Pf @ Pf)
    norm_ps = float(Psf @ Psf)

    c_low = f < boundary_min - eps
    c_low_defect = float(np.max(1.0 - phi[c_low])) if c_low.any() else 0.0
    transition = (phi > 0.0) & (phi < 1.0)
    strip_margin = float(f[transition].min() - f_x0) if transition.any() else float('inf')
    if strip_margin <= 0.0:
        logger.warning(f"Quasimode strip condition fails at h={h}: margin {strip_margin:.4g}")

    report = QuasimodeReport(h=h, e1=e1, predicted=predicted, e2_ratio=norm_p / e1, e3_ratio=norm_ps / e1,
                             norm_p=norm_p, norm_p_adjoint=norm_ps, strip_margin=strip_margin,
                             c_low_defect=c_low_defect, delta=delta, eps=eps)
    logger.info(f"Quasimode at h={h}: E1={e1:.6g}"
                + (f" (ratio to prediction {report.e1_ratio:.4f})" if report.e1_ratio is not None else '')
                + f", E2 ratio {report.e2_ratio:.4g}, E3 ratio {report.e3_ratio:.4g}")
    return report


@dataclass
class MeanExitTimeGrid:
    """L_d T = 1 の解"""
    values: np.ndarray
    operator: GridOperator

    def at(self, x) -> float:
        """x に最も近い内部節点での値"""
        period = self.operator.spacing * self.operator.n_per_axis
        dx = self.operator.nodes - np.asarray(x, dtype=float)
        dx -= period * np.round(dx / period)
        return float(self.values[int(np.argmin(np.linalg.norm(dx, axis=-1)))])


def mean_exit_time_grid(operator: GridOperator) -> MeanExitTimeGrid:
    """格子上の平均脱出時間 T（L_d T = 1、Dirichlet）"""
    if operator.tag != 'L':
        raise PreconditionError(f"mean_exit_time_grid requires an L operator, got {operator.tag}")
    try:
        values = spla.spsolve(operator.matrix.tocsc(), np.ones(operator.size))
    except RuntimeError as e:
        raise FactorizationError("Sparse solve for the mean exit time failed", str(e))
    if not np.all(np.isfinite(values)):
        raise FactorizationError("Sparse solve for the mean exit time produced non-finite values")
    return MeanExitTimeGrid(values=values, operator=operator)


def qsd_vector(operator: GridOperator) -> np.ndarray:
    """L_d の左主固有ベクトル（和が 1 の離散準定常分布）"""
    if operator.tag != 'L':
        raise PreconditionError(f"qsd_vector requires an L operator, got {operator.tag}")
    left = principal_eig(operator.with_matrix(operator.matrix.T, 'L*'))
    nu = np.real(left.vector)
    return nu / nu.sum()


def qsd_identity(operator: GridOperator) -> dict:
    """λ·(νᵀT)/(νᵀ1)（格子上では 1 に一致する）"""
    lam = principal_eig(operator).value
    nu = qsd_vector(operator)
    mean = mean_exit_time_grid(operator)
    identity = lam * float(nu @ mean.values) / float(nu.sum())
    logger.info(f"QSD identity at h={operator.h}: {identity:.12g}")
    return {'lambda': lam, 'qsd_mean_exit_time': float(nu @ mean.values), 'identity': identity,
            'deviation': abs(identity - 1.0)}


def accretivity_check(operator: GridOperator, n_vectors: int = 50, seed: int = 0) -> dict:
    """乱数ベクトル w での min Re⟨(P + h‖div ℓ‖_∞) w, w⟩ / |w|²"""
    rng = np.random.default_rng(seed)
    shift = operator.h * operator.div_ell_max
    worst = np.inf
    for _ in range(n_vectors):
        w = rng.standard_normal(operator.size)
        value = float(w @ (operator.matrix @ w) + shift * (w @ w)) / float(w @ w)
        worst = min(worst, value)
    return {'min_numerical_range': worst, 'passed': worst >= -ACCRETIVITY_TOL, 'n_vectors': n_vectors}


def transpose_defect(p_operator: GridOperator, adjoint_operator: GridOperator) -> float:
    """max |P − (P*)ᵀ| の成分"""
    difference = (p_operator.matrix - adjoint_operator.matrix.T).tocoo()
    return float(np.max(np.abs(difference.data))) if difference.nnz else 0.0


def grid_convergence(build: Callable[[int], GridOperator], n: int) -> dict:
    """
    n, 2n, 4n での主固有値の差の比

    2次精度なら |λ_n − λ_2n| ≤ 4·|λ_2n − λ_4n| となる。
    """
    values = [principal_eig(build(m)).value for m in (n, 2 * n, 4 * n)]
    coarse = abs(values[0] - values[1])
    fine = abs(values[1] - values[2])
    ratio = coarse / fine if fine > 0.0 else float('inf')
    return {'n': [n, 2 * n, 4 * n], 'eigenvalues': values, 'ratio': ratio,
            'passed': coarse <= 4.0 * (1.0 + 1e-6) * fine}
