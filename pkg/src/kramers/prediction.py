"""
Eyring–Kramers 型の予測

    λ^L(h) = (κ₁ h^{−1/2} + κ₂) e^{−2Δ/h}
    κ₁ = √det Hess f(x₀)/√π · Σ_{case 1} ∂_n f(z)/√det Hess f|∂Ω(z)
    κ₂ = √det Hess f(x₀)/2π · Σ_{case 2} 2|μ(z)|/√|det Hess f(z)|

P 規約（P = 2h e^{−f/h} L e^{f/h}）では κ^P = 2κ^L。
"""

import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..core.exceptions import AssumptionViolation, PreconditionError
from ..landscape import AssumptionReport, BoundaryRecord, CriticalPoint

logger = logging.getLogger(__name__)


@dataclass
class Contribution:
    """境界最小点1つ分の寄与"""
    z: np.ndarray
    case: int
    value: float                    # κ₁ または κ₂ の和への寄与（面の数で重み付けしない）
    sides: int = 1
    reversible_value: float = 0.0   # |μ| を |λ| に置き換えた値（case 2）

    def to_dict(self) -> dict:
        return {
            'z': self.z.tolist(),
            'case': self.case,
            'contribution': self.value,
            'sides': self.sides,
            'reversible_contribution': self.reversible_value
        }


@dataclass
class Prediction:
    """温度 h での予測"""
    h: float
    lambda_: float
    mean_exit_time: float
    note: str

    def to_dict(self) -> dict:
        return {'h': self.h, 'lambda': self.lambda_, 'mean_exit_time': self.mean_exit_time,
                'note': self.note}


@dataclass
class ArrheniusExponent:
    """アレニウス指数 2Δ"""
    barrier: float

    @property
    def two_delta(self) -> float:
        return 2.0 * self.barrier

    def to_dict(self) -> dict:
        return {
            'barrier': self.barrier,
            'two_delta': self.two_delta,
            'limit_minus_h_log_lambda': self.two_delta,
            'limit_h_log_mean_exit_time': self.two_delta
        }


@dataclass
class KramersPrediction:
    """Eyring–Kramers 予測"""
    barrier: float
    f_x0: float
    det_x0: float
    kappa1: float
    kappa2: float
    kappa1_sided: float
    kappa2_sided: float
    kappa2_reversible: float
    contributions: List[Contribution] = field(default_factory=list)

    @property
    def kappa1_p(self) -> float:
        return 2.0 * self.kappa1

    @property
    def kappa2_p(self) -> float:
        return 2.0 * self.kappa2

    @property
    def acceleration(self) -> float:
        """κ₂ / κ₂^rev（可逆版に対する加速率）"""
        if self.kappa2_reversible == 0.0:
            return float('nan')
        return self.kappa2 / self.kappa2_reversible

    @property
    def error_order(self) -> str:
        if self.kappa1 == 0.0 or self.kappa2 == 0.0:
            return 'O(h^(1/2))'
        return 'O(h^(1/4))'

    def _kappas(self, sided: bool):
        return (self.kappa1_sided, self.kappa2_sided) if sided else (self.kappa1, self.kappa2)

    def lambda_(self, h: float, sided: bool = False) -> float:
        """λ^L(h)"""
        if h <= 0.0:
            raise PreconditionError(f"Temperature h must be positive, got {h}")
        k1, k2 = self._kappas(sided)
        return (k1 / math.sqrt(h) + k2) * math.exp(-2.0 * self.barrier / h)

    def lambda_p(self, h: float, sided: bool = False) -> float:
        """λ^P(h) = 2h λ^L(h)"""
        return 2.0 * h * self.lambda_(h, sided)

    def quasimode_energy(self, h: float, sided: bool = True) -> float:
        """(κ₁^P h^{1/2} + κ₂^P h) e^{−2Δ/h}"""
        return self.lambda_p(h, sided)

    def predict(self, h: float, sided: bool = False) -> Prediction:
        lam = self.lambda_(h, sided)
        return Prediction(h=h, lambda_=lam, mean_exit_time=1.0 / lam, note=self.error_order)

    def prediction_table(self, h_values: Sequence[float], sided: bool = False) -> List[Prediction]:
        return [self.predict(h, sided) for h in h_values]

    def to_dict(self) -> dict:
        return {
            'barrier': self.barrier,
            'two_delta': 2.0 * self.barrier,
            'f_x0': self.f_x0,
            'det_hessian_x0': self.det_x0,
            'kappa1': self.kappa1,
            'kappa2': self.kappa2,
            'kappa1_P': self.kappa1_p,
            'kappa2_P': self.kappa2_p,
            'kappa1_sided': self.kappa1_sided,
            'kappa2_sided': self.kappa2_sided,
            'kappa2_reversible': self.kappa2_reversible,
            'acceleration': self.acceleration,
            'error_order': self.error_order,
            'contributions': [c.to_dict() for c in self.contributions]
        }


def prefactors(x0: CriticalPoint, records: Sequence[BoundaryRecord], boundary_min: float) -> KramersPrediction:
    """
    前因子 κ₁, κ₂ を計算する

    Args:
        x0: Ω 内の唯一の極小点
        records: ∂C_min ∩ ∂Ω の各点の (Normal) 判定
        boundary_min: min_{∂Ω} f

    Returns:
        KramersPrediction

    Raises:
        AssumptionViolation: 正であるべき行列式が正でない
    """
    det_x0 = float(np.linalg.det(x0.hessian))
    if det_x0 <= 0.0:
        raise AssumptionViolation(f"det Hess f(x0) = {det_x0:.6g} is not positive", 'One-Well')
    barrier = boundary_min - x0.f_value
    if barrier <= 0.0:
        raise AssumptionViolation(f"Barrier {barrier:.6g} is not positive", 'One-Well')
    root = math.sqrt(det_x0)

    contributions: List[Contribution] = []
    k1 = k1_sided = k2 = k2_sided = k2_rev = 0.0
    for record in records:
        z = record.point.z
        sides = max(1, record.point.sides)
        if record.case == 1:
            det_b = record.det_boundary
            if det_b is None or not det_b > 0.0:
                raise AssumptionViolation(
                    f"det Hess f|boundary at {z.tolist()} is {det_b}, a positive value is required", 'Normal'
                )
            value = root / math.sqrt(math.pi) * record.normal_derivative / math.sqrt(det_b)
            k1 += value
            k1_sided += sides * value
            contributions.append(Contribution(z=z, case=1, value=value, sides=sides))
        else:
            saddle = record.saddle
            if saddle is None:
                raise AssumptionViolation(f"Missing saddle data at {z.tolist()}", 'Normal')
            abs_det = abs(float(np.linalg.det(saddle.hessian)))
            value = root / (2.0 * math.pi) * 2.0 * abs(saddle.mu) / math.sqrt(abs_det)
            reversible = root / (2.0 * math.pi) * 2.0 * abs(saddle.lambda_neg) / math.sqrt(abs_det)
            k2 += value
            k2_sided += sides * value
            k2_rev += reversible
            contributions.append(Contribution(z=z, case=2, value=value, sides=sides,
                                              reversible_value=reversible))

    if k1 + k2 <= 0.0:
        raise AssumptionViolation("Both prefactors vanish; no boundary minimizer contributes", 'Normal')
    prediction = KramersPrediction(
        barrier=barrier, f_x0=x0.f_value, det_x0=det_x0,
        kappa1=k1, kappa2=k2, kappa1_sided=k1_sided, kappa2_sided=k2_sided,
        kappa2_reversible=k2_rev, contributions=contributions
    )
    logger.info(f"Prefactors: kappa1={k1:.10g}, kappa2={k2:.10g} "
                f"(sided {k1_sided:.10g}, {k2_sided:.10g}), 2*Delta={2 * barrier:.10g}")
    return prediction


def prefactors_from_report(report: AssumptionReport) -> KramersPrediction:
    """全判定が通ったレポートから予測を作る（失敗時は AssumptionViolation）"""
    report.require()
    return prefactors(report.x0, report.records, report.boundary_min)


def arrhenius_exponent(report: AssumptionReport) -> ArrheniusExponent:
    """2Δ = 2(min_{∂Ω} f − f(x₀))"""
    if not report.verdicts.get('One-Well', False) or report.x0 is None:
        raise AssumptionViolation("Assumption (One-Well) failed", 'One-Well', report.notes.get('One-Well'))
    return ArrheniusExponent(barrier=report.barrier)


def predicted_mean(prediction: Optional[KramersPrediction], h: float, sided: bool = True) -> Optional[float]:
    """予測平均脱出時間（予測がなければ None）"""
    if prediction is None:
        return None
    return 1.0 / prediction.lambda_(h, sided)
