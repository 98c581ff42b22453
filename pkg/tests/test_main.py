"""
コマンドラインと終了コードのテストコード
"""

import json
import logging
import textwrap

import pytest

import main

TWO_WELL = "configs/two_well_1d.yaml"
FLAGSHIP = "configs/flagship_reversible.yaml"
ROTATIONAL = "configs/flagship_rotational.yaml"


@pytest.fixture(autouse=True)
def reset_root_logger():
    """main が付けたハンドラーを次のテストに残さない"""
    root = logging.getLogger()
    before = list(root.handlers)
    yield
    for handler in list(root.handlers):
        if handler not in before:
            root.removeHandler(handler)


def _config(tmp_path, body: str):
    path = tmp_path / "config.yaml"
    path.write_text(textwrap.dedent(body), encoding='utf-8')
    return str(path)


class TestUsage:
    """使い方の誤りのテストクラス"""

    # TC-001: 引数なし
    def test_no_arguments(self, capsys):
        assert main.main([]) == main.EXIT_USAGE
        assert 'kramers-lab: error' in capsys.readouterr().err

    # TC-002: 未知のコマンド
    def test_unknown_command(self):
        assert main.main(['integrate', '--config', TWO_WELL]) == main.EXIT_USAGE

    # TC-003: --config がない
    def test_missing_config_option(self):
        assert main.main(['validate']) == main.EXIT_USAGE

    # TC-004: 設定ファイルがない
    def test_missing_config_file(self, tmp_path):
        assert main.main(['validate', '--config', str(tmp_path / 'none.yaml')]) == main.EXIT_USAGE

    # TC-005: 不正な設定値
    def test_invalid_config_value(self, tmp_path):
        path = _config(tmp_path, """
            mc:
              n_paths: -5
        """)
        assert main.main(['simulate', '--config', path]) == main.EXIT_USAGE

    # TC-006: 式の構文エラー
    def test_bad_expression(self, tmp_path):
        path = _config(tmp_path, """
            problem:
              dimension: 1
              potential: "cos(2*pi*x1"
              domain:
                g: "x1*(x1 - 1)"
        """)
        assert main.main(['validate', '--config', path]) == main.EXIT_USAGE


class TestCommands:
    """コマンド実行のテストクラス"""

    # TC-007: validate は判定を出して成功する
    def test_validate_reports_verdicts(self, tmp_path):
        out = tmp_path / 'validate.json'
        assert main.main(['validate', '--config', TWO_WELL, '--out', str(out)]) == main.EXIT_OK
        report = json.loads(out.read_text(encoding='utf-8'))
        assert report['command'] == 'validate'
        assert report['landscape']['assumptions']['verdicts']['One-Well'] is False

    # TC-008: 標準出力への書き出し
    def test_validate_to_stdout(self, capsys):
        assert main.main(['validate', '--config', TWO_WELL]) == main.EXIT_OK
        assert json.loads(capsys.readouterr().out)['command'] == 'validate'

    # TC-009: 仮定が成り立たないときの predict
    def test_predict_requires_assumptions(self, tmp_path):
        out = tmp_path / 'predict.json'
        assert main.main(['predict', '--config', TWO_WELL, '--out', str(out)]) == main.EXIT_ASSUMPTION
        assert not out.exists()

    # TC-010: 実行時の失敗
    def test_runtime_failure(self, tmp_path):
        """境界のない領域では境界走査が失敗する"""
        path = _config(tmp_path, """
            problem:
              dimension: 1
              potential: "cos(2*pi*x1)"
              domain:
                g: "-1"
        """)
        assert main.main(['validate', '--config', path]) == main.EXIT_RUNTIME

    # TC-011: --seed と --threads は設定を上書きする
    def test_seed_and_threads_override(self, tmp_path):
        first, second = tmp_path / 'a.json', tmp_path / 'b.json'
        assert main.main(['validate', '--config', TWO_WELL, '--threads', '2', '--out', str(first)]) == 0
        assert main.main(['validate', '--config', TWO_WELL, '--threads', '4', '--out', str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert main.main(['validate', '--config', TWO_WELL, '--seed', '11', '--out', str(second)]) == 0
        assert json.loads(second.read_text(encoding='utf-8'))['config']['mc']['seed'] == 11

    # TC-012: 旗艦問題は4つの仮定をすべて満たす
    @pytest.mark.parametrize("config", [FLAGSHIP, ROTATIONAL])
    def test_validate_flagship_passes_all_clauses(self, tmp_path, config):
        """鞍点は境界上にあり、内部の臨界点は極小点 (0.5, 0.5) だけ"""
        out = tmp_path / 'validate.json'
        assert main.main(['validate', '--config', config, '--out', str(out)]) == main.EXIT_OK
        assumptions = json.loads(out.read_text(encoding='utf-8'))['landscape']['assumptions']
        assert assumptions['verdicts'] == {'Ortho': True, 'Div-free': True, 'One-Well': True, 'Normal': True}
        assert assumptions['onewell']['interior_critical_points'] == 1
        assert assumptions['onewell']['x0']['location'] == pytest.approx([0.5, 0.5], abs=1e-8)

    # TC-013: spectrum はどの離散化で計算したかを記録する
    @pytest.mark.parametrize("potential", ["gibbs", "pointwise"])
    def test_spectrum_records_stencil(self, tmp_path, potential):
        path = _config(tmp_path, f"""
            problem:
              dimension: 1
              period: 4.0
              potential: "0"
              drift:
                kind: none
              domain:
                g: "x1^2 - 1"
                origin: [-2.0]
            mc:
              start: [0.0]
            spectral:
              n_per_axis: 64
              h_values: [1.0]
              potential: {potential}
        """)
        out = tmp_path / 'spectrum.json'
        assert main.main(['spectrum', '--config', path, '--out', str(out)]) == main.EXIT_OK
        spectral = json.loads(out.read_text(encoding='utf-8'))['spectral']
        assert spectral['stencil']['potential'] == potential
        assert spectral['stencil']['n_per_axis'] == 64
        for point in spectral['sweep']:
            assert point['potential'] == potential
            assert point['principal_P']['operator']['potential'] == potential
