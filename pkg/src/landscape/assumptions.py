"""
標準仮定 (Ortho) / (Div-free) / (One-Well) / (Normal) の検証

検証結果は AssumptionReport に判定として格納し、ここでは例外を送出しない。
下流の処理は require() で判定を強制する。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from ..core.exceptions import AssumptionViolation, MorseViolationError, OrthoViolationError
from ..fields import Drift, ScalarField, VectorField
from ..geometry import BoundaryPoint, Region
from .critical_points import CriticalPoint, classify, interior_points, newton_polish
from .saddle import SaddleData, saddle_analysis

logger = logging.getLogger(__name__)

CLAUSES = ('Ortho', 'Div-free', 'One-Well', 'Normal')
TOUCH_RADIUS_REL = 1e-3
TOUCH_DIRECTIONS = 256


@dataclass(frozen=True)
class Tolerances:
    """仮定検証の許容値"""
    grad_rel: float = 1e-6
    angle: float = 1e-6
    ortho: float = 1e-10
    cluster: float = 1e-8
    det: float = 1e-8

    @classmethod
    def from_config(cls, config) -> 'Tolerances':
        section = config.get('tolerances', {}) or {}
        return cls(**{k: float(v) for k, v in section.items()})


@dataclass
class BoundaryRecord:
    """境界最小点ごとの (Normal) 判定"""
    point: BoundaryPoint
    case: int                               # 1: ∇f ≠ 0, 2: ∇f = 0
    passed: bool
    angle: Optional[float] = None           # case 2: angle(ξ, n)
    saddle: Optional[SaddleData] = None
    det_boundary: Optional[float] = None    # case 1: det Hess f|∂Ω
    normal_derivative: Optional[float] = None
    ell_norm: float = 0.0
    near_degenerate: bool = False
    note: str = ''

    def to_dict(self) -> dict:
        record = self.point.to_dict()
        record.update({
            'case': self.case,
            'passed': self.passed,
            'angle': self.angle,
            'det_boundary_hessian': self.det_boundary,
            'normal_derivative': self.normal_derivative,
            'ell_norm': self.ell_norm,
            'near_degenerate': self.near_degenerate,
            'note': self.note
        })
        if self.saddle is not None:
            record['saddle'] = self.saddle.to_dict()
        return record


@dataclass
class AssumptionReport:
    """仮定検証レポート"""
    ortho_residual: float
    drift_residual: float
    divfree_residual: float
    interior_count: int
    x0: Optional[CriticalPoint]
    boundary_min: float
    boundary_minimizers: List[BoundaryPoint] = field(default_factory=list)
    records: List[BoundaryRecord] = field(default_factory=list)
    verdicts: Dict[str, bool] = field(default_factory=dict)
    notes: Dict[str, str] = field(default_factory=dict)

    @property
    def cmin_boundary_empty(self) -> bool:
        return not self.records

    @property
    def barrier(self) -> float:
        if self.x0 is None:
            return float('nan')
        return self.boundary_min - self.x0.f_value

    @property
    def passed(self) -> bool:
        return all(self.verdicts.get(c, False) for c in CLAUSES)

    @property
    def failed_clauses(self) -> List[str]:
        return [c for c in CLAUSES if not self.verdicts.get(c, False)]

    def require(self) -> None:
        """いずれかの判定が失敗していれば AssumptionViolation を送出する"""
        if not self.passed:
            clause = self.failed_clauses[0]
            raise AssumptionViolation(f"Assumption ({clause}) failed", clause, self.notes.get(clause))

    def to_dict(self) -> dict:
        return {
            'verdicts': dict(self.verdicts),
            'passed': self.passed,
            'ortho': {'max_orthogonality_residual': self.ortho_residual,
                      'max_drift_residual': self.drift_residual},
            'divfree': {'max_divergence': self.divfree_residual},
            'onewell': {
                'interior_critical_points': self.interior_count,
                'x0': None if self.x0 is None else self.x0.to_dict(),
                'boundary_min_f': self.boundary_min,
                'barrier': self.barrier,
                'cmin_boundary_empty': self.cmin_boundary_empty
            },
            'normal': [r.to_dict() for r in self.records],
            'notes': dict(self.notes),
            'caveat': 'boundary smoothness is checked at sampled points only'
        }


def sample_points(region: Region, n: int, seed: int) -> np.ndarray:
    """低食い違い（Halton）点列をチャート上に置く"""
    sampler = qmc.Halton(d=region.torus.dimension, scramble=True, seed=seed)
    return region.torus.offset + region.torus.period * sampler.random(n)


def _touches_sublevel(f: ScalarField, region: Region, point: BoundaryPoint, seed: int) -> bool:
    """z の近傍に Ω ∩ {f < f(z)} の点があるか"""
    d = region.torus.dimension
    r = TOUCH_RADIUS_REL * region.torus.period
    if d == 1:
        directions = np.array([[1.0], [-1.0]])
    else:
        rng = np.random.default_rng(seed)
        directions = rng.standard_normal((TOUCH_DIRECTIONS, d))
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    probes = point.lift + r * directions
    inside = np.asarray(region.contains(probes), dtype=bool)
    lower = f.value(probes) < point.f_value - 1e-14 * max(1.0, abs(point.f_value))
    return bool(np.any(inside & lower))


def _match_saddle(f: ScalarField, region: Region, point: BoundaryPoint,
                  critical_points: Sequence[CriticalPoint], ell: VectorField) -> CriticalPoint:
    torus = region.torus
    for cp in critical_points:
        if torus.distance(cp.location, point.z) <= 1e-4 * torus.period:
            return cp
    x = point.lift[None, :].copy()
    newton_polish(f, x, torus)
    return classify(f, torus.canonical(x[0]), ell)


def _check_case2(f, ell, region, point, critical_points, tol: Tolerances) -> BoundaryRecord:
    try:
        cp = _match_saddle(f, region, point, critical_points, ell)
    except MorseViolationError as e:
        return BoundaryRecord(point=point, case=2, passed=False, note=e.message)
    if cp.morse_index != 1:
        return BoundaryRecord(point=point, case=2, passed=False,
                              note=f"critical point on the boundary has Morse index {cp.morse_index}")
    try:
        saddle = saddle_analysis(cp, ell)
    except OrthoViolationError as e:
        return BoundaryRecord(point=point, case=2, passed=False, note=e.message)
    along = float(saddle.xi @ point.normal)
    across = float(np.linalg.norm(saddle.xi - along * point.normal))
    angle = float(np.arctan2(across, abs(along)))
    passed = angle <= tol.angle
    return BoundaryRecord(point=point, case=2, passed=passed, angle=angle, saddle=saddle,
                          ell_norm=cp.ell_norm,
                          note='' if passed else f"xi(z) is {angle:.3e} rad off the boundary normal")


def _check_case1(f, ell, region, point, grad_scale, det_scale, tol: Tolerances) -> BoundaryRecord:
    lift = point.lift
    ell_norm = float(np.linalg.norm(ell.value(lift))) if not ell.is_zero else 0.0
    det = region.boundary_hessian_det(f, lift)
    dn = float(f.gradient(lift) @ point.normal)
    near_degenerate = bool(np.isfinite(det) and abs(det) < tol.det * det_scale)
    if near_degenerate:
        logger.warning(f"Near-degenerate boundary Hessian at {point.z.tolist()}: det={det:.3e}")
    notes = []
    if ell_norm > tol.ortho * (1.0 + grad_scale ** 2):
        notes.append(f"|ell(z)| = {ell_norm:.3e} does not vanish")
    if not np.isfinite(det) or det == 0.0:
        notes.append("boundary Hessian determinant is zero or undefined")
    if dn <= 0.0:
        notes.append(f"normal derivative {dn:.3e} is not positive")
    return BoundaryRecord(point=point, case=1, passed=not notes, det_boundary=det,
                          normal_derivative=dn, ell_norm=ell_norm,
                          near_degenerate=near_degenerate, note='; '.join(notes))


def validate_assumptions(f: ScalarField, ell: VectorField, region: Region,
                         critical_points: Sequence[CriticalPoint], samples: int = 1000,
                         boundary_samples: int = 2000, tolerances: Optional[Tolerances] = None,
                         seed: int = 7) -> AssumptionReport:
    """
    標準仮定を検証する

    Args:
        f: ポテンシャル
        ell: 非可逆ドリフト ℓ
        region: 領域 Ω
        critical_points: find_critical_points の結果
        samples: (Ortho)/(Div-free) の標本点数
        boundary_samples: 境界走査の点数
        tolerances: 許容値
        seed: 乱数シード

    Returns:
        AssumptionReport
    """
    tol = tolerances or Tolerances()
    notes: Dict[str, str] = {}

    # (Ortho) / (Div-free)
    x = sample_points(region, samples, seed)
    grad = f.gradient(x)
    weight = 1.0 + np.sum(grad ** 2, axis=-1)
    ell_values = ell.value(x)
    b = Drift(f, ell)(x)
    ortho_residual = float(np.max(np.abs(np.sum(ell_values * grad, axis=-1)) / weight))
    drift_residual = float(np.max(np.linalg.norm(b + grad + ell_values, axis=-1) / weight))
    divfree_residual = float(np.max(np.abs(ell.divergence(x)) / weight))
    ortho_ok = ortho_residual <= tol.ortho and drift_residual <= tol.ortho
    divfree_ok = divfree_residual <= tol.ortho
    if not ortho_ok:
        notes['Ortho'] = f"max |ell.grad f| / (1+|grad f|^2) = {ortho_residual:.3e}"
    if not divfree_ok:
        notes['Div-free'] = f"max |div ell| / (1+|grad f|^2) = {divfree_residual:.3e}"
    grad_scale = float(np.max(np.linalg.norm(grad, axis=-1)))

    # (One-Well)
    interior = interior_points(critical_points, region)
    x0 = interior[0] if len(interior) == 1 and interior[0].morse_index == 0 else None
    scan = region.boundary_scan(f, boundary_samples, seed=seed, tol_cluster=tol.cluster)
    touched = [m for m in scan.minimizers if _touches_sublevel(f, region, m, seed)]
    onewell_ok = x0 is not None and bool(touched) and scan.f_min > x0.f_value
    if x0 is None:
        notes['One-Well'] = (f"{len(interior)} critical point(s) inside the domain; "
                             "exactly one minimum is required")
    elif not touched:
        notes['One-Well'] = "no boundary minimizer touches the sublevel set of the minimum"
    elif not onewell_ok:
        notes['One-Well'] = "minimum is not below the boundary minimum"

    # (Normal)
    tol_grad = tol.grad_rel * grad_scale
    det_scale = 1.0
    if x0 is not None and len(x0.eigenvalues) > 1:
        det_scale = float(np.abs(x0.eigenvalues).max()) ** (len(x0.eigenvalues) - 1)
    records: List[BoundaryRecord] = []
    for point in touched:
        if point.grad_norm <= tol_grad:
            records.append(_check_case2(f, ell, region, point, critical_points, tol))
        else:
            records.append(_check_case1(f, ell, region, point, grad_scale, det_scale, tol))
    normal_ok = bool(records) and all(r.passed for r in records)
    failing = [r for r in records if not r.passed]
    if failing:
        notes['Normal'] = '; '.join(f"z={np.round(r.point.z, 8).tolist()}: {r.note}" for r in failing)
    elif not records:
        notes['Normal'] = "no boundary minimizer to check"

    verdicts = {'Ortho': ortho_ok, 'Div-free': divfree_ok, 'One-Well': onewell_ok, 'Normal': normal_ok}
    for clause, ok in verdicts.items():
        log = logger.info if ok else logger.warning
        log(f"Assumption ({clause}): {'pass' if ok else 'FAIL'}"
            + (f" - {notes[clause]}" if clause in notes else ''))

    return AssumptionReport(
        ortho_residual=ortho_residual,
        drift_residual=drift_residual,
        divfree_residual=divfree_residual,
        interior_count=len(interior),
        x0=x0,
        boundary_min=scan.f_min,
        boundary_minimizers=list(scan.minimizers),
        records=records,
        verdicts=verdicts,
        notes=notes
    )
