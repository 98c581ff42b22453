"""
Eyring–Kramers 予測のテストコード
"""

import math

import numpy as np
import pytest

from src.core.exceptions import AssumptionViolation, PreconditionError
from src.geometry import BoundaryPoint
from src.kramers import arrhenius_exponent, predicted_mean, prefactors, prefactors_from_report
from src.landscape import AssumptionReport, BoundaryRecord, CriticalPoint, saddle_from_matrices

FOUR_PI2 = 4.0 * math.pi ** 2
J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _minimum(hessian, f_value=-2.0, location=(0.5, 0.5)):
    hessian = np.asarray(hessian, dtype=float)
    return CriticalPoint(location=np.asarray(location, dtype=float), hessian=hessian,
                         eigenvalues=np.linalg.eigvalsh(hessian), morse_index=0,
                         grad_residual=0.0, f_value=f_value)


def _point(z, normal, sides=1, f_value=0.0):
    z = np.asarray(z, dtype=float)
    return BoundaryPoint(z=z, lift=z.copy(), normal=np.asarray(normal, dtype=float),
                         f_value=f_value, sides=sides)


def _saddle_record(z, normal, lmat, sides=2):
    """旗艦問題の鞍点（Hess f = diag(±4π²)）の記録"""
    H = np.diag([FOUR_PI2, -FOUR_PI2]) if normal[1] else np.diag([-FOUR_PI2, FOUR_PI2])
    saddle = saddle_from_matrices(H, lmat(H))
    return BoundaryRecord(point=_point(z, normal, sides), case=2, passed=True, angle=0.0, saddle=saddle)


@pytest.fixture
def flagship_records():
    return [
        _saddle_record([0.5, 0.0], [0.0, -1.0], lambda H: np.zeros((2, 2))),
        _saddle_record([0.0, 0.5], [-1.0, 0.0], lambda H: np.zeros((2, 2))),
    ]


class TestPrefactors:
    """前因子計算のテストクラス"""

    # TC-001: 可逆な旗艦問題
    def test_reversible_flagship(self, flagship_records):
        """κ₁ = 0、κ₂ = 8π、両側で数えると 16π"""
        prediction = prefactors(_minimum(FOUR_PI2 * np.eye(2)), flagship_records, 0.0)
        assert prediction.kappa1 == 0.0
        assert prediction.kappa2 == pytest.approx(8.0 * math.pi, rel=1e-10)
        assert prediction.kappa2_sided == pytest.approx(16.0 * math.pi, rel=1e-10)
        assert prediction.kappa2_p == pytest.approx(16.0 * math.pi, rel=1e-10)
        assert prediction.barrier == pytest.approx(2.0)
        assert prediction.acceleration == pytest.approx(1.0)
        assert prediction.error_order == 'O(h^(1/2))'

    # TC-002: 回転形ドリフトの加速
    def test_rotational_acceleration(self):
        """ℓ = J∇f のとき |μ| = √2·4π² で κ₂ = 8√2π"""
        records = [
            _saddle_record([0.5, 0.0], [0.0, -1.0], lambda H: J @ H),
            _saddle_record([0.0, 0.5], [-1.0, 0.0], lambda H: J @ H),
        ]
        prediction = prefactors(_minimum(FOUR_PI2 * np.eye(2)), records, 0.0)
        assert prediction.kappa2 == pytest.approx(8.0 * math.sqrt(2.0) * math.pi, rel=1e-10)
        assert prediction.kappa2_reversible == pytest.approx(8.0 * math.pi, rel=1e-10)
        assert prediction.acceleration == pytest.approx(math.sqrt(2.0), rel=1e-10)

    # TC-003: 境界で ∇f ≠ 0 の寄与
    def test_case1_contribution(self):
        """κ₁ = √det Hess f(x₀)/√π · ∂_n f/√det Hess f|∂Ω"""
        x0 = _minimum([[4.0]], f_value=0.0, location=(0.0,))
        record = BoundaryRecord(point=_point([1.0], [1.0], f_value=1.0), case=1, passed=True,
                                det_boundary=1.0, normal_derivative=2.0)
        prediction = prefactors(x0, [record], 1.0)
        assert prediction.kappa1 == pytest.approx(4.0 / math.sqrt(math.pi))
        assert prediction.kappa2 == 0.0
        assert prediction.error_order == 'O(h^(1/2))'

    # TC-004: λ と平均脱出時間
    def test_lambda_and_mean_exit_time(self, flagship_records):
        prediction = prefactors(_minimum(FOUR_PI2 * np.eye(2)), flagship_records, 0.0)
        h = 0.4
        expected = 8.0 * math.pi * math.exp(-4.0 / h)
        assert prediction.lambda_(h) == pytest.approx(expected, rel=1e-12)
        assert prediction.lambda_p(h) == pytest.approx(2 * h * expected, rel=1e-12)
        assert prediction.predict(h).mean_exit_time == pytest.approx(1.0 / expected, rel=1e-12)
        assert predicted_mean(prediction, h, sided=True) == pytest.approx(1.0 / (2 * expected), rel=1e-12)
        assert predicted_mean(None, h) is None
        assert [p.h for p in prediction.prediction_table([0.4, 0.3])] == [0.4, 0.3]

    # TC-005: 温度は正
    def test_lambda_requires_positive_h(self, flagship_records):
        prediction = prefactors(_minimum(FOUR_PI2 * np.eye(2)), flagship_records, 0.0)
        with pytest.raises(PreconditionError):
            prediction.lambda_(0.0)

    # TC-006: 障壁が正でない
    def test_non_positive_barrier(self, flagship_records):
        with pytest.raises(AssumptionViolation):
            prefactors(_minimum(FOUR_PI2 * np.eye(2), f_value=0.0), flagship_records, 0.0)

    # TC-007: 境界ヘッセ行列式が正でない
    def test_non_positive_boundary_determinant(self):
        x0 = _minimum([[4.0]], f_value=0.0, location=(0.0,))
        record = BoundaryRecord(point=_point([1.0], [1.0], f_value=1.0), case=1, passed=True,
                                det_boundary=-1.0, normal_derivative=2.0)
        with pytest.raises(AssumptionViolation) as exc_info:
            prefactors(x0, [record], 1.0)
        assert exc_info.value.clause == 'Normal'

    # TC-008: 辞書表現
    def test_to_dict(self, flagship_records):
        data = prefactors(_minimum(FOUR_PI2 * np.eye(2)), flagship_records, 0.0).to_dict()
        assert data['two_delta'] == pytest.approx(4.0)
        assert len(data['contributions']) == 2
        assert data['contributions'][0]['sides'] == 2


class TestFromReport:
    """仮定レポートからの予測のテストクラス"""

    def _report(self, records, verdicts):
        return AssumptionReport(ortho_residual=0.0, drift_residual=0.0, divfree_residual=0.0,
                                interior_count=1, x0=_minimum(FOUR_PI2 * np.eye(2)), boundary_min=0.0,
                                records=records, verdicts=verdicts)

    # TC-009: 全判定が通れば予測を返す
    def test_passing_report(self, flagship_records):
        verdicts = {'Ortho': True, 'Div-free': True, 'One-Well': True, 'Normal': True}
        prediction = prefactors_from_report(self._report(flagship_records, verdicts))
        assert prediction.kappa2 == pytest.approx(8.0 * math.pi, rel=1e-10)
        assert arrhenius_exponent(self._report(flagship_records, verdicts)).two_delta == pytest.approx(4.0)

    # TC-010: 判定の失敗
    def test_failing_report(self, flagship_records):
        """(Normal) が失敗していれば予測は AssumptionViolation（2Δ は求まる）"""
        verdicts = {'Ortho': True, 'Div-free': True, 'One-Well': True, 'Normal': False}
        report = self._report(flagship_records, verdicts)
        with pytest.raises(AssumptionViolation) as exc_info:
            prefactors_from_report(report)
        assert exc_info.value.clause == 'Normal'
        assert exc_info.value.exit_code == 2
        assert arrhenius_exponent(report).two_delta == pytest.approx(4.0)

    # TC-011: (One-Well) がなければ 2Δ も定まらない
    def test_arrhenius_requires_onewell(self, flagship_records):
        verdicts = {'Ortho': True, 'Div-free': True, 'One-Well': False, 'Normal': True}
        with pytest.raises(AssumptionViolation):
            arrhenius_exponent(self._report(flagship_records, verdicts))
