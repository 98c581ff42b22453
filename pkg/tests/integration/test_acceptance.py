"""
受け入れ実験（縮小版）

出荷する設定ファイルから Lab を組み立て、予測・モンテカルロ・格子スペクトル・
最小作用の結果を突き合わせる。標本数と格子は机上で回る大きさに縮めてある。
"""

import math

import numpy as np
import pytest

from src.core import ConfigManager
from src.lab import Lab, dumps, run
from src.lab.report import prefactor_entry, quasimode_entry, spectral_structure_entry
from src.landscape import basin_membership, check_saddle_invariants, saddle_from_matrices
from src.mc import SimConfig, arrhenius_fit, derived_seed, exit_law_test, leveling_check

REVERSIBLE = "configs/flagship_reversible.yaml"
ROTATIONAL = "configs/flagship_rotational.yaml"
TWO_WELL = "configs/two_well_1d.yaml"
FREE = "configs/free_brownian_1d.yaml"

pytestmark = pytest.mark.integration


def _lab(path, **overrides) -> Lab:
    return Lab(ConfigManager(path, overrides=overrides))


def _rotation(theta: float) -> np.ndarray:
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


class TestSaddleProperties:
    """鞍点行列の性質のテストクラス"""

    # TC-101: 無作為な二次元・三次元の鞍点
    def test_random_saddles(self):
        rng = np.random.default_rng(2024)
        J = np.array([[0.0, -1.0], [1.0, 0.0]])
        for _ in range(200):
            R = _rotation(rng.uniform(0.0, 2 * math.pi))
            H = R @ np.diag([rng.uniform(0.5, 5.0), -rng.uniform(0.5, 5.0)]) @ R.T
            a = rng.uniform(-2.0, 2.0)
            invariants = check_saddle_invariants(saddle_from_matrices(H, a * J @ H))
            assert invariants.all_pass
        for _ in range(50):
            Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            H = Q @ np.diag([rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0), -rng.uniform(0.5, 5.0)]) @ Q.T
            A = rng.standard_normal((3, 3))
            A = A - A.T
            invariants = check_saddle_invariants(saddle_from_matrices(H, A @ H))
            assert invariants.all_pass
            assert invariants.det_relative_error <= 1e-8


class TestPrefactors:
    """閉じた形の前因子のテストクラス"""

    # TC-102: 旗艦問題の κ₂
    def test_flagship_prefactors(self):
        reversible = _lab(REVERSIBLE).prediction
        assert reversible.kappa2 == pytest.approx(8.0 * math.pi, rel=1e-8)
        assert reversible.barrier == pytest.approx(2.0, rel=1e-10)
        rotational = _lab(ROTATIONAL).prediction
        assert rotational.kappa2 == pytest.approx(8.0 * math.sqrt(2.0) * math.pi, rel=1e-6)
        assert rotational.acceleration == pytest.approx(math.sqrt(2.0), rel=1e-6)


@pytest.mark.slow
@pytest.mark.timeout(3600)
class TestExitTimes:
    """脱出時間の統計のテストクラス"""

    H_VALUES = (0.5, 0.45, 0.4)

    @pytest.fixture(scope='class')
    def lab(self):
        return _lab(REVERSIBLE, **{'runtime.threads': 4, 'spectral.n_per_axis': 64})

    @pytest.fixture(scope='class')
    def sweep(self, lab):
        """h ごとに 512 本の脱出時間"""
        return {h: lab.sample(h, 512, derived_seed(20240611, 'acceptance', i))
                for i, h in enumerate(self.H_VALUES)}

    # TC-103: アレニウス則
    def test_arrhenius_slope(self, sweep):
        fit = arrhenius_fit([(h, samples.summary().mean) for h, samples in sweep.items()])
        assert fit.slope == pytest.approx(4.0, rel=0.10)

    # TC-104: 準定常分布の恒等式
    def test_lambda_times_mean_exit_time(self, lab, sweep):
        product = lab.principal_l(0.4).value * sweep[0.4].summary().mean
        assert 0.75 <= product <= 1.3

    # TC-105: 指数脱出則
    def test_exponential_exit_law(self, lab, sweep):
        result = exit_law_test(sweep[0.4], lab.principal_l(0.4).value, level=0.01)
        assert result.passed, result.to_dict()

    # TC-106: 鋭い前因子
    def test_sharp_prefactor(self, lab, sweep):
        ratios = {h: samples.summary().mean / (1.0 / lab.prediction.lambda_(h, sided=True))
                  for h, samples in sweep.items()}
        entry = prefactor_entry(ratios, 0.4, 0.7, 1.4)
        assert 0.7 <= entry.value['ratio'] <= 1.4

    # TC-107: 平均脱出時間の平準化
    def test_leveling(self, lab):
        problem = lab.problem
        landscape = lab.landscape
        x0 = landscape.x0
        cfg = SimConfig(h=0.5, dt=5e-4, n_paths=256, starts=x0.location[None, :], seed=11, threads=4)

        def in_basin(s):
            return basin_membership(problem.region, x0, s, problem.drift, problem.f, landscape.critical_points)

        result = leveling_check(problem.drift, problem.region, cfg, [[0.5, 0.5], [0.4, 0.5], [0.5, 0.6]], in_basin)
        assert result.passed, result.to_dict()

    # TC-108: 自由ブラウン運動
    def test_free_brownian_mean_exit_time(self):
        """E_0[τ] = 1/h"""
        report = run('simulate', ConfigManager(FREE, overrides={'mc.n_paths': 1000, 'mc.dt': 1e-3,
                                                                'runtime.threads': 4}))
        for record in report['mc']['sweep']:
            assert record['summary']['mean'] == pytest.approx(1.0 / record['h'], rel=0.10)


class TestSpectral:
    """格子スペクトルのテストクラス"""

    # TC-109: 非可逆ドリフトによる加速
    def test_rotational_acceleration(self):
        reversible = _lab(REVERSIBLE, **{'spectral.n_per_axis': 64}).principal_l(0.35).value
        rotational = _lab(ROTATIONAL, **{'spectral.n_per_axis': 64}).principal_l(0.35).value
        assert 1.2 <= rotational / reversible <= 1.6

    # TC-110: 二重井戸の構造
    def test_two_well_structure(self):
        sweep = _lab(TWO_WELL).spectrum()['spectral']['sweep']
        assert all(point['small_eigenvalues']['count'] == 2 for point in sweep)
        assert spectral_structure_entry(sweep).passed

    # TC-111: 旗艦問題の構造と準モード
    @pytest.mark.slow
    @pytest.mark.timeout(1800)
    def test_flagship_structure_and_quasimode(self):
        sweep = _lab(REVERSIBLE).spectrum()['spectral']['sweep']
        assert [point['h'] for point in sweep] == [0.4, 0.3, 0.25]
        assert spectral_structure_entry(sweep).passed
        assert all(point['small_eigenvalues']['count'] == 1 for point in sweep)
        assert all(point['qsd_identity']['deviation'] <= 1e-4 for point in sweep)
        entry = quasimode_entry(sweep, 0.20)
        assert entry.passed, entry.to_dict()

    # TC-112: 自由ブラウン運動の格子平均脱出時間
    def test_free_brownian_grid(self):
        sweep = _lab(FREE).spectrum()['spectral']['sweep']
        assert sweep[0]['mean_exit_time_at_start'] == pytest.approx(1.0, abs=1e-8)
        assert sweep[0]['principal_L']['eigenvalue'] == pytest.approx(math.pi ** 2 / 8.0, rel=1e-3)
        assert sweep[0]['small_eigenvalues']['count'] == 0


@pytest.mark.slow
@pytest.mark.timeout(1800)
class TestQuasiPotential:
    """最小作用法のテストクラス"""

    # TC-113: 鞍点への準ポテンシャル
    @pytest.mark.parametrize("path", [REVERSIBLE, ROTATIONAL])
    def test_quasi_potential(self, path):
        """V(x₀ → z) = 2Δ = 4、V(z → x₀) ≈ 0"""
        section = _lab(path).mam()['action']
        assert len(section['paths']) == 2
        for item in section['paths']:
            assert item['forward']['value'] == pytest.approx(4.0, rel=0.02)
            assert item['reverse']['value'] <= 1e-3
            assert item['lower_bound_ok']
        assert section['wgraph']['value'] == pytest.approx(4.0, rel=0.02)


@pytest.mark.slow
@pytest.mark.timeout(1200)
class TestDeterminism:
    """再現性のテストクラス"""

    # TC-114: スレッド数に依存しないレポート
    def test_reports_are_byte_identical(self):
        overrides = {'mc.h_values': [0.8, 0.7, 0.6], 'mc.n_paths': 96, 'mc.block_size': 32, 'mc.dt': 1e-3}
        texts = set()
        for threads in (1, 4, 8):
            config = ConfigManager(REVERSIBLE, overrides=dict(overrides, **{'runtime.threads': threads}))
            texts.add(dumps(run('simulate', config)))
        assert len(texts) == 1
        config = ConfigManager(REVERSIBLE, overrides=dict(overrides, **{'runtime.threads': 1}))
        assert dumps(run('simulate', config)) in texts
