"""
格子作用素とスペクトル診断のテストコード
"""

import csv
import math

import numpy as np
import pytest

from src.core.exceptions import EmptyGridError, PreconditionError, QuasimodeError
from src.fields import ScalarField, VectorField
from src.geometry import Region, Torus
from src.landscape import find_critical_points, validate_assumptions
from src.spectral import (
    accretivity_check, assemble, boundary_profile, eigenfunction_concentration, export_eigenvector,
    grid_convergence, mean_exit_time_grid, principal_eig, qsd_identity, qsd_vector, quasimode_rayleigh,
    quasimode_vector, retag, small_eig_count, small_eig_threshold, smooth_step, sublevel_component, transpose_defect
)

FLAGSHIP_F = "cos(2*pi*x1) + cos(2*pi*x2)"
SQUARE_G = "-sin(pi*x1)*sin(pi*x2)"


@pytest.fixture(scope='module')
def interval():
    """区間 (−1, 1) ⊂ 周期 4 の円、f = 0"""
    torus = Torus(1, 4.0, origin=(-2.0,))
    region = Region(ScalarField.from_source("x1^2 - 1", 1), torus)
    return ScalarField.from_source("0", 1), region


@pytest.fixture(scope='module')
def flagship():
    """旗艦問題（ℓ = 0 と回転形 ℓ = J∇f）と仮定検証の結果"""
    torus = Torus(2, 1.0)
    f = ScalarField.from_source(FLAGSHIP_F, 2)
    region = Region(ScalarField.from_source(SQUARE_G, 2), torus)
    points = find_critical_points(f, torus)
    report = validate_assumptions(f, VectorField.zero(2), region, points, samples=200, boundary_samples=400)
    return f, VectorField.rotational(f, 1.0), region, report


class TestAssemble:
    """格子作用素の組み立てのテストクラス"""

    # TC-001: 自由な区間での主固有値
    def test_free_interval_principal_eigenvalue(self, interval):
        """L = −(h/2)Δ の (−1, 1) 上の主固有値は hπ²/8"""
        f, region = interval
        for h in (1.0, 0.5):
            op = assemble(f, None, region, 256, h, tag='L')
            assert principal_eig(op).value == pytest.approx(h * math.pi ** 2 / 8.0, rel=1e-3)

    # TC-002: 格子上の平均脱出時間は二次式を厳密に再現する
    def test_free_interval_mean_exit_time(self, interval):
        """T(x) = (1 − x²)/h"""
        f, region = interval
        op = assemble(f, None, region, 128, 0.5, tag='L')
        T = mean_exit_time_grid(op)
        np.testing.assert_allclose(T.values, (1.0 - op.nodes[:, 0] ** 2) / 0.5, atol=1e-8)
        assert T.at([0.0]) == pytest.approx(2.0, abs=1e-8)

    # TC-003: ギブス重みの核
    def test_gibbs_kernel(self):
        """領域が全体のとき P e^{−f/h} = 0"""
        torus = Torus(2, 1.0)
        f = ScalarField.from_source(FLAGSHIP_F, 2)
        region = Region(ScalarField.from_source("-1", 2), torus)
        op = assemble(f, None, region, 32, 0.4)
        u = np.exp(-(op.f_values - op.f_values.min()) / op.h)
        residual = np.linalg.norm(op.matrix @ u)
        assert residual <= 1e-10 * abs(op.matrix).max() * np.linalg.norm(u)

    # TC-004: 転置双対性
    def test_adjoint_is_transpose(self, flagship):
        f, ell, region, _ = flagship
        p = assemble(f, ell, region, 32, 0.3, tag='P')
        p_star = assemble(f, ell, region, 32, 0.3, tag='P*')
        assert transpose_defect(p, p_star) <= 1e-12

    # TC-005: 発散ゼロのドリフトは対称部分に寄与しない
    def test_rotational_symmetric_part_is_witten(self, flagship):
        f, ell, region, _ = flagship
        rep = assemble(f, ell, region, 32, 0.3, tag='ReP')
        reversible = assemble(f, None, region, 32, 0.3, tag='P')
        assert abs(rep.matrix - reversible.matrix).max() <= 1e-9

    # TC-006: retag
    def test_retag_requires_p(self, interval):
        f, region = interval
        op = assemble(f, None, region, 32, 1.0, tag='L')
        with pytest.raises(PreconditionError):
            retag(op, 'ReP')

    # TC-007: 引数の検査
    @pytest.mark.parametrize("kwargs", [
        {'n_per_axis': 8}, {'tag': 'Q'}, {'potential': 'exact'}, {'h': 0.0}
    ])
    def test_invalid_arguments(self, interval, kwargs):
        f, region = interval
        params = {'n_per_axis': 32, 'h': 1.0, 'tag': 'P', 'potential': 'gibbs'}
        params.update(kwargs)
        with pytest.raises(PreconditionError):
            assemble(f, None, region, **params)

    # TC-008: 格子点のない領域
    def test_empty_grid(self):
        torus = Torus(1, 1.0)
        region = Region(ScalarField.from_source("(x1 - 0.01)^2 - 0.000001", 1), torus)
        with pytest.raises(EmptyGridError):
            assemble(ScalarField.from_source("0", 1), None, region, 16, 1.0)

    # TC-009: 点ごとの Witten ポテンシャル
    def test_pointwise_potential_close_to_gibbs(self, interval):
        f, region = interval
        gibbs = principal_eig(assemble(f, None, region, 128, 1.0, potential='gibbs')).value
        pointwise = principal_eig(assemble(f, None, region, 128, 1.0, potential='pointwise')).value
        assert pointwise == pytest.approx(gibbs, rel=1e-12)


class TestEigen:
    """主固有値・小固有値のテストクラス"""

    # TC-010: 逆べき乗法と Arnoldi の一致
    def test_power_and_arnoldi_agree(self, flagship):
        f, ell, region, _ = flagship
        op = assemble(f, ell, region, 32, 0.4)
        power = principal_eig(op, method='power')
        arnoldi = principal_eig(op, method='arnoldi')
        assert power.value == pytest.approx(arnoldi.value, rel=1e-8)
        assert power.invariants_hold

    # TC-011: 主固有対の不変量
    def test_principal_invariants(self, flagship):
        """実数・正・正値ベクトル"""
        f, ell, region, _ = flagship
        result = principal_eig(assemble(f, ell, region, 32, 0.3))
        assert result.imag_ratio <= 1e-8
        assert result.value > 0.0
        assert result.negativity_fraction <= 1e-6
        assert result.to_dict()['invariants_hold'] is True

    # TC-012: 未知の手法
    def test_unknown_method(self, interval):
        f, region = interval
        with pytest.raises(PreconditionError):
            principal_eig(assemble(f, None, region, 32, 1.0), method='lanczos')

    # TC-013: 閾値
    def test_small_eig_threshold(self):
        assert small_eig_threshold([4 * math.pi ** 2], 0.3) == pytest.approx(0.1 * 4 * math.pi ** 2 * 0.3)
        assert small_eig_threshold([], 0.3, c=2.0) == pytest.approx(0.6)
        assert small_eig_threshold([], 0.5) == pytest.approx(0.05)

    # TC-014: 旗艦問題の小固有値は1個
    @pytest.mark.parametrize("h", [0.4, 0.3, 0.2])
    def test_flagship_small_eigenvalue_count(self, flagship, h):
        f, _, region, report = flagship
        op = assemble(f, None, region, 64, h, tag='ReP')
        threshold = small_eig_threshold(report.x0.eigenvalues, h)
        result = small_eig_count(op, threshold, m0=1)
        assert result.count == 1
        assert result.matches is True

    # TC-015: 二重井戸の小固有値は2個
    @pytest.mark.parametrize("h", [0.2, 0.15, 0.1])
    def test_two_well_small_eigenvalue_count(self, h):
        torus = Torus(1, 1.0)
        f = ScalarField.from_source("cos(2*pi*x1) + 0.5*cos(4*pi*x1)", 1)
        region = Region(ScalarField.from_source("x1*(x1 - 1)", 1), torus)
        op = assemble(f, None, region, 128, h, tag='ReP')
        result = small_eig_count(op, small_eig_threshold([6 * math.pi ** 2], h), m0=2)
        assert result.count == 2

    # TC-016: 自由な場合は小固有値なし
    def test_free_case_has_no_small_eigenvalue(self, interval):
        """λ₁ = h²π²/4 は閾値 0.1·h を上回る"""
        f, region = interval
        op = assemble(f, None, region, 128, 0.5, tag='ReP')
        assert small_eig_count(op, small_eig_threshold([], 0.5), m0=0).count == 0

    # TC-017: 閾値とタグの検査
    def test_small_eig_count_preconditions(self, interval):
        f, region = interval
        with pytest.raises(PreconditionError):
            small_eig_count(assemble(f, None, region, 32, 1.0, tag='ReP'), 0.0)
        with pytest.raises(PreconditionError):
            small_eig_count(assemble(f, None, region, 32, 1.0, tag='L'), 0.1)


class TestDiagnostics:
    """スペクトル診断のテストクラス"""

    # TC-018: 滑らかな階段関数
    def test_smooth_step(self):
        values = smooth_step([-1.0, 0.0, 0.5, 1.0, 2.0])
        np.testing.assert_allclose(values, [0.0, 0.0, 0.5, 1.0, 1.0])

    # TC-019: 準定常分布の恒等式
    def test_qsd_identity(self, flagship):
        """格子上では λ·E_ν[T] = 1"""
        f, ell, region, _ = flagship
        op = assemble(f, ell, region, 32, 0.4, tag='L')
        result = qsd_identity(op)
        assert result['identity'] == pytest.approx(1.0, abs=1e-6)
        nu = qsd_vector(op)
        assert nu.sum() == pytest.approx(1.0)
        assert np.all(nu >= -1e-10)

    # TC-020: 数値域の非負性
    def test_accretivity(self, flagship):
        f, ell, region, _ = flagship
        result = accretivity_check(assemble(f, ell, region, 32, 0.3))
        assert result['passed']
        assert result['n_vectors'] == 50

    # TC-021: 固有関数の集中
    def test_eigenfunction_concentration(self, flagship):
        f, ell, region, report = flagship
        op = assemble(f, ell, region, 64, 0.3)
        vector = principal_eig(op).vector
        result = eigenfunction_concentration(vector, op, report.x0.f_value, report.boundary_min, eta=1.0)
        assert result.mass_ratio > 0.99
        assert result.distance < 0.15

    # TC-022: η の範囲
    def test_concentration_eta_range(self, flagship):
        f, ell, region, report = flagship
        op = assemble(f, ell, region, 32, 0.3)
        with pytest.raises(PreconditionError):
            eigenfunction_concentration(np.ones(op.size), op, report.x0.f_value, report.boundary_min, eta=2.5)

    # TC-023: 劣位集合の連結成分
    def test_sublevel_component(self, flagship):
        f, _, region, _ = flagship
        op = assemble(f, None, region, 32, 0.3)
        component = sublevel_component(op, -1.0)
        assert component.any()
        assert np.all(op.f_values[component] < -1.0)

    # TC-024: 境界プロファイル
    def test_boundary_profile(self):
        profile = boundary_profile(np.zeros(2), case=2, rate=4 * math.pi ** 2, h=0.3, delta=0.25)
        assert profile(np.array([0.0]))[0] == 0.0
        assert profile(np.array([0.25]))[0] == pytest.approx(1.0)
        assert np.all(np.diff(profile.values) >= 0.0)

    # TC-025: 準モードのレイリー商
    def test_quasimode_rayleigh(self, flagship):
        f, _, region, report = flagship
        op = assemble(f, None, region, 64, 0.3)
        predicted = 2 * 0.3 * 16 * math.pi * math.exp(-4.0 / 0.3)
        result = quasimode_rayleigh(op, region, report.records, report.x0.f_value, report.boundary_min,
                                    delta=0.25, predicted=predicted)
        assert result.e1 > 0.0
        assert result.e1_ratio is not None and 0.3 < result.e1_ratio < 3.0
        assert result.c_low_defect == 0.0
        assert result.to_dict()['E1_predicted'] == predicted

    # TC-026: 境界最小点がない準モード
    def test_quasimode_without_records(self, flagship):
        f, _, region, report = flagship
        op = assemble(f, None, region, 32, 0.3)
        with pytest.raises(QuasimodeError):
            quasimode_rayleigh(op, region, [], report.x0.f_value, report.boundary_min, delta=0.25)

    # TC-027: 格子収束
    def test_grid_convergence(self, interval):
        """2次精度の差分で差の比が 4 以下"""
        f, region = interval
        result = grid_convergence(lambda n: assemble(f, None, region, n, 1.0, tag='L'), 32)
        assert result['passed']
        assert result['n'] == [32, 64, 128]

    # TC-028: 固有ベクトルの CSV 出力
    def test_export_eigenvector(self, interval, tmp_path):
        f, region = interval
        op = assemble(f, None, region, 16, 1.0)
        vector = principal_eig(op).vector
        path = export_eigenvector(op, vector, tmp_path / 'eig.csv')
        with open(path, newline='', encoding='utf-8') as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ['i1', 'x1', 'value']
        assert len(rows) == op.size + 1

    # TC-029: 準モードのプロファイルは境界最小点の近くだけで使う
    def test_quasimode_vector_localizes_profiles(self, flagship):
        """C_low では 1、鞍点から 2δ 以上離れた帯では smooth_step(v/δ)"""
        f, _, region, report = flagship
        op = assemble(f, None, region, 64, 0.3)
        eps = 0.1 * (report.boundary_min - report.x0.f_value)
        phi = quasimode_vector(op, region, report.records, 0.15, boundary_min=report.boundary_min, eps=eps)
        assert np.all((phi >= 0.0) & (phi <= 1.0))
        np.testing.assert_array_equal(phi[op.f_values < report.boundary_min - eps], 1.0)

        lifts, _ = region.lift_inside(op.nodes)
        v = -region.g.value(lifts) / np.linalg.norm(region.g.gradient(lifts), axis=-1)
        far = np.all(np.stack([region.torus.distance(op.nodes, r.point.z) for r in report.records]) >= 0.3,
                     axis=0)
        far &= op.f_values >= report.boundary_min
        assert far.any()
        np.testing.assert_allclose(phi[far], smooth_step(v[far] / 0.15), atol=1e-12)
