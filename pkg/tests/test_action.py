"""
作用汎関数・最小作用法・W-グラフのテストコード
"""

import csv

import numpy as np
import pytest

from src.core.exceptions import CombinatorialCapError, PreconditionError
from src.fields import Drift, ScalarField, VectorField
from src.geometry import Torus
from src.action import (
    Path, action, action_and_gradient, action_lower_bound, export_path, heteroclinic_path, minimize_action,
    resample, straight_path, time_grid, wgraph_bound
)
from src.landscape import find_critical_points

FLAGSHIP_F = "cos(2*pi*x1) + cos(2*pi*x2)"


class TestPath:
    """離散経路と作用のテストクラス"""

    # TC-001: ドリフトなしの直線
    def test_action_of_free_straight_path(self):
        """b = 0 で 0 → 1 を T = 2 で進むと S = T|v|²/2 = 0.25"""
        torus = Torus(1, 4.0, origin=(-2.0,))
        path = straight_path([0.0], [1.0], torus, 20, 2.0)
        value = action(path, Drift(ScalarField.from_source("0", 1)))
        assert value.value == pytest.approx(0.25, rel=1e-12)
        assert value.to_dict()['n_segments'] == 20

    # TC-002: 流れに沿う経路の作用は 0
    def test_action_along_flow_vanishes(self):
        """f = x1 の流れ ẋ = −1"""
        torus = Torus(1, 4.0, origin=(-2.0,))
        path = straight_path([1.0], [0.0], torus, 16, 1.0)
        assert action(path, Drift(ScalarField.from_source("x1", 1))).value == pytest.approx(0.0, abs=1e-24)

    # TC-003: 解析的な勾配
    def test_gradient_matches_finite_differences(self):
        f = ScalarField.from_source(FLAGSHIP_F, 2)
        drift = Drift(f, VectorField.rotational(f, 1.0))
        rng = np.random.default_rng(3)
        nodes = rng.uniform(0.0, 1.0, size=(9, 2))
        dt = 0.05
        _, grad = action_and_gradient(nodes, dt, drift)
        step = 1e-6
        for k in (0, 4, 8):
            for i in range(2):
                plus, minus = nodes.copy(), nodes.copy()
                plus[k, i] += step
                minus[k, i] -= step
                fd = (action_and_gradient(plus, dt, drift)[0] - action_and_gradient(minus, dt, drift)[0]) / (2 * step)
                assert grad[k, i] == pytest.approx(fd, rel=1e-5, abs=1e-6)

    # TC-004: 周期境界をまたぐ線分
    def test_straight_path_uses_minimum_image(self):
        torus = Torus(1, 1.0)
        path = straight_path([0.9], [0.1], torus, 16, 1.0)
        assert path.nodes[-1, 0] == pytest.approx(1.1)
        assert path.is_consistent(torus)
        assert path.canonical_nodes(torus)[-1, 0] == pytest.approx(0.1)

    # TC-005: 再配置
    def test_resample(self):
        torus = Torus(2, 1.0)
        path = straight_path([0.1, 0.1], [0.4, 0.3], torus, 16, 2.0)
        fine = resample(path, 32, by='arclength', total_time=3.0)
        assert fine.n_segments == 32
        assert fine.total_time == 3.0
        np.testing.assert_allclose(fine.nodes[[0, -1]], path.nodes[[0, -1]])
        assert resample(path, 20).dt == pytest.approx(0.1)
        with pytest.raises(PreconditionError):
            resample(path, 20, by='curvature')

    # TC-006: 経路の検査
    def test_invalid_path(self):
        with pytest.raises(PreconditionError):
            Path(nodes=np.zeros((2, 1)), total_time=1.0)
        with pytest.raises(PreconditionError):
            Path(nodes=np.zeros((5, 1)), total_time=0.0)

    # TC-007: 下界
    def test_action_lower_bound(self):
        f = ScalarField.from_source(FLAGSHIP_F, 2)
        path = straight_path([0.5, 0.5], [0.5, 0.0], Torus(2, 1.0), 16, 1.0)
        assert action_lower_bound(path, f) == pytest.approx(4.0)

    # TC-008: CSV 出力
    def test_export_path(self, tmp_path):
        path = straight_path([0.1, 0.2], [0.3, 0.4], Torus(2, 1.0), 16, 1.0)
        out = export_path(path, tmp_path / 'path.csv')
        with open(out, newline='', encoding='utf-8') as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ['k', 't', 'x1', 'x2']
        assert len(rows) == 18
        assert float(rows[-1][1]) == pytest.approx(1.0)


class TestHeteroclinic:
    """ヘテロクリニック軌道のテストクラス"""

    # TC-009: 極小点から鞍点へ
    def test_heteroclinic_path(self):
        """可逆な場合の作用は 2(f(z) − f(x₀)) = 4"""
        torus = Torus(2, 1.0)
        f = ScalarField.from_source(FLAGSHIP_F, 2)
        points = find_critical_points(f, torus)
        minimum = points[-1]
        saddle = points[2]
        drift = Drift(f)
        path = heteroclinic_path(drift, minimum, saddle, torus)
        assert torus.distance(path.nodes[0], minimum.location) < 1e-3
        assert torus.distance(path.nodes[-1], saddle.location) < 1e-5
        assert action(path, drift).value == pytest.approx(4.0, rel=1e-2)


class TestMinimumAction:
    """最小作用法のテストクラス"""

    # TC-010: 一次元で極小から極大へ
    def test_one_dimensional_quasi_potential(self):
        """f = cos 2πx の V(1/2, 0) = 2·(1 − (−1)) = 4"""
        torus = Torus(1, 1.0)
        drift = Drift(ScalarField.from_source("cos(2*pi*x1)", 1))
        result = minimize_action([0.5], [0.0], drift, torus, 128, [0.25])
        assert result.value == pytest.approx(4.0, rel=3e-2)
        assert result.monotone
        assert result.to_dict()['n_segments'] == 128
        assert len(result.runs) == 1

    # TC-011: 初期経路の追加
    def test_initial_paths_add_runs(self):
        torus = Torus(1, 1.0)
        drift = Drift(ScalarField.from_source("cos(2*pi*x1)", 1))
        extra = straight_path([0.5], [0.0], torus, 16, 1.0)
        result = minimize_action([0.5], [0.0], drift, torus, 32, [0.25, 0.5], initial_paths=[extra])
        assert [run.initializer for run in result.runs] == ['straight', 'initial_0'] * 2
        assert result.value == min(run.value for run in result.runs)

    # TC-012: 引数の検査
    def test_preconditions(self):
        torus = Torus(1, 1.0)
        drift = Drift(ScalarField.from_source("cos(2*pi*x1)", 1))
        with pytest.raises(PreconditionError):
            minimize_action([0.5], [0.0], drift, torus, 8, [1.0])
        with pytest.raises(PreconditionError):
            minimize_action([0.5], [0.0], drift, torus, 32, [])

    # TC-013: 時間格子
    def test_time_grid(self):
        assert time_grid(1.0, 2.0) == [1.0, 2.0, 4.0, 8.0, 16.0]
        assert time_grid(2.0, 4.0, factors=(1.0,)) == [1.0]
        with pytest.raises(PreconditionError):
            time_grid(1.0, 0.0)


class TestWGraph:
    """W-グラフのテストクラス"""

    # TC-014: 安定点1つ
    def test_single_stable_point(self):
        result = wgraph_bound([[0.0, 3.0]])
        assert result.value == 3.0
        assert result.n_graphs == 1

    # TC-015: 安定点2つ
    def test_two_stable_points(self):
        """K_0 → K_1 → ∂D が最小（1 + 4）"""
        result = wgraph_bound([[0.0, 1.0, 5.0], [2.0, 0.0, 4.0]])
        assert result.value == 5.0
        assert result.arrows == [(0, 1), (1, 2)]
        assert result.n_graphs == 3
        assert result.to_dict()['arrows'] == [[0, 1], [1, 'boundary']]

    # TC-016: グラフの個数は (p+1)^{p−1}
    def test_graph_count(self):
        V = np.random.default_rng(0).uniform(1.0, 2.0, size=(3, 4))
        assert wgraph_bound(V).n_graphs == 16

    # TC-017: 上限
    def test_cap(self):
        with pytest.raises(CombinatorialCapError):
            wgraph_bound(np.ones((7, 8)))

    # TC-018: 行列の検査
    def test_invalid_matrix(self):
        with pytest.raises(PreconditionError):
            wgraph_bound(np.ones((2, 2)))
        V = np.ones((2, 3))
        V[0, 2] = np.nan
        with pytest.raises(PreconditionError):
            wgraph_bound(V)
