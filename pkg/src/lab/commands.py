"""
実験の実行（validate / predict / simulate / spectrum / mam / report）
"""

import math
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..action import (
    action_lower_bound, export_path, heteroclinic_path, minimize_action, quasi_potential_matrix,
    time_grid, wgraph_bound
)
from ..action.wgraph import MAX_STABLE_POINTS
from ..core.exceptions import ActionError, AssumptionViolation, InsufficientSamplesError, PreconditionError
from ..core.performance_monitor import StageTimer
from ..kramers import KramersPrediction, arrhenius_exponent, predicted_mean, prefactors_from_report
from ..landscape import basin_membership, check_saddle_invariants
from ..mc import (
    DEFAULT_MAX_STEPS, ExitSampleSet, SimConfig, arrhenius_fit, committor, derived_seed, exit_law_test,
    export_exit_samples, leveling_check, sample_exits, start_points_from_weights
)
from ..spectral import (
    GridOperator, SpectralResult, accretivity_check, assemble, eigenfunction_concentration, export_eigenvector,
    mean_exit_time_grid, principal_eig, qsd_identity, qsd_vector, quasimode_rayleigh, retag,
    small_eig_count, small_eig_threshold, transpose_defect
)
from . import report as ledger
from .problem import Landscape, Problem, analyze_landscape, build_problem, start_point
from .report import LedgerEntry, provenance

logger = logging.getLogger(__name__)

COMMANDS = ('validate', 'predict', 'simulate', 'spectrum', 'mam', 'report')

# 既定の打ち切りは予測平均脱出時間のこの倍数
CENSOR_FACTOR = 10.0
MIN_AUTO_STEPS = 1000
DEFAULT_COLLAR = 0.25
DEFAULT_ETA = 0.5
LEVELING_OFFSET = 0.1
LOWER_BOUND_SLACK = 1e-2


def _suffixed(path: str, h: float) -> Path:
    """export.csv -> export_h0.35.csv"""
    p = Path(path)
    return p.with_name(f"{p.stem}_h{h:g}{p.suffix or '.csv'}")


class Lab:
    """
    設定1つ分の実験

    問題の組み立てと地形解析は最初に必要になったときに1回だけ行い、
    格子作用素と主固有値は h ごとにキャッシュする。
    """

    def __init__(self, config):
        """
        初期化

        Args:
            config: ConfigManager（検証済み）
        """
        self.config = config
        self.timer = StageTimer()
        self.problem: Problem = build_problem(config)
        self._landscape: Optional[Landscape] = None
        self._landscape_error: Optional[AssumptionViolation] = None
        self._prediction: Optional[KramersPrediction] = None
        self._operators: Dict[Tuple[float, str], GridOperator] = {}
        self._principal: Dict[float, SpectralResult] = {}

    # --- 共有の下準備 -----------------------------------------------------

    @property
    def landscape(self) -> Landscape:
        if self._landscape_error is not None:
            raise self._landscape_error
        if self._landscape is None:
            with self.timer.stage('landscape'):
                try:
                    self._landscape = analyze_landscape(self.problem, self.config)
                except AssumptionViolation as e:
                    logger.warning(f"Landscape analysis failed: {e.message}")
                    self._landscape_error = e
                    raise
        return self._landscape

    def optional_landscape(self) -> Optional[Landscape]:
        """地形解析の結果（退化した臨界点などで解析できなければ None）"""
        try:
            return self.landscape
        except AssumptionViolation:
            return None

    @property
    def prediction(self) -> KramersPrediction:
        """予測（仮定が成り立たなければ AssumptionViolation）"""
        if self._prediction is None:
            self._prediction = prefactors_from_report(self.landscape.report)
        return self._prediction

    def optional_prediction(self) -> Optional[KramersPrediction]:
        landscape = self.optional_landscape()
        return self.prediction if landscape is not None and landscape.report.passed else None

    @property
    def threads(self) -> int:
        return int(self.config.get('runtime.threads', 1))

    def operator(self, h: float, tag: str) -> GridOperator:
        """h ごとに P を1回だけ組み立て、他のタグはそこから作る"""
        key = (float(h), tag)
        if key not in self._operators:
            base_key = (float(h), 'P')
            if base_key not in self._operators:
                self._operators[base_key] = assemble(
                    self.problem.f, self.problem.ell, self.problem.region,
                    int(self.config.get('spectral.n_per_axis')), float(h), 'P',
                    self.config.get('spectral.potential')
                )
            self._operators[key] = retag(self._operators[base_key], tag)
        return self._operators[key]

    def principal_l(self, h: float) -> SpectralResult:
        """格子生成作用素 L の主固有対"""
        if float(h) not in self._principal:
            self._principal[float(h)] = principal_eig(self.operator(h, 'L'), self.config.get('spectral.method'))
        return self._principal[float(h)]

    def _grid_provenance(self, h: float) -> dict:
        return provenance('spectral', grid=int(self.config.get('spectral.n_per_axis')), h=h)

    # --- validate ---------------------------------------------------------

    def validate(self) -> dict:
        """地形の検証のみ"""
        landscape = self.landscape
        section = landscape.to_dict()
        section['provenance'] = provenance('landscape', seed=int(self.config.get('landscape.seed')),
                                           grid=int(self.config.get('landscape.grid_per_axis')))
        return {'problem': self.problem.to_dict(), 'landscape': section}

    # --- predict ----------------------------------------------------------

    def predict(self) -> dict:
        """
        Eyring–Kramers 予測

        Raises:
            AssumptionViolation: 標準仮定のいずれかが成り立たない
        """
        prediction = self.prediction
        report = self.landscape.report
        h_values = [float(h) for h in self.config.get('kramers.h_values')]
        invariants = []
        for record in report.records:
            if record.saddle is not None:
                checked = check_saddle_invariants(record.saddle)
                invariants.append({'z': record.point.z.tolist(), 'all_pass': checked.all_pass,
                                   'det_relative_error': checked.det_relative_error})
        section = prediction.to_dict()
        section.update({
            'arrhenius': arrhenius_exponent(report).to_dict(),
            'table': [p.to_dict() for p in prediction.prediction_table(h_values)],
            'table_sided': [p.to_dict() for p in prediction.prediction_table(h_values, sided=True)],
            'saddle_invariants': invariants,
            'provenance': provenance('kramers', seed=int(self.config.get('landscape.seed')),
                                     grid=int(self.config.get('landscape.grid_per_axis')))
        })
        return {'prediction': section}

    # --- simulate ---------------------------------------------------------

    def _max_steps(self, h: float, prediction: Optional[KramersPrediction]) -> int:
        configured = self.config.get('mc.max_steps')
        if configured is not None:
            return int(configured)
        mean = predicted_mean(prediction, h)
        if mean is None:
            return DEFAULT_MAX_STEPS
        return max(MIN_AUTO_STEPS, int(math.ceil(CENSOR_FACTOR * mean / float(self.config.get('mc.dt')))))

    def _starts(self, h: float, n_paths: int, seed: int, start=None) -> np.ndarray:
        if start is not None:
            return np.atleast_2d(np.asarray(start, dtype=float))
        if self.config.get('mc.start_distribution') == 'qsd':
            operator = self.operator(h, 'L')
            return start_points_from_weights(operator.nodes, qsd_vector(operator), n_paths, seed)
        configured = self.config.get('mc.start')
        landscape = None if configured is not None else self.optional_landscape()
        return start_point(configured, landscape, 'mc.start')[None, :]

    def sample(self, h: float, n_paths: int, seed: int, start=None) -> ExitSampleSet:
        """温度 h で n_paths 本の脱出時間を引く"""
        cfg = SimConfig(
            h=float(h), dt=float(self.config.get('mc.dt')), n_paths=int(n_paths),
            starts=self._starts(h, n_paths, seed, start), seed=seed,
            max_steps=self._max_steps(h, self.optional_prediction()),
            block_size=int(self.config.get('mc.block_size')),
            chunk_steps=int(self.config.get('mc.chunk_steps')),
            threads=self.threads
        )
        return sample_exits(self.problem.drift, self.problem.region, cfg)

    def simulate(self) -> dict:
        """温度の掃引で平均脱出時間を測り、アレニウス当てはめと予測比を出す"""
        prediction = self.optional_prediction()
        seed = int(self.config.get('mc.seed'))
        n_paths = int(self.config.get('mc.n_paths'))
        export = self.config.get('mc.export_csv')
        runs = []
        with self.timer.stage('mc'):
            for i, h in enumerate(float(v) for v in self.config.get('mc.h_values')):
                run_seed = derived_seed(seed, 'sweep', i)
                samples = self.sample(h, n_paths, run_seed)
                summary = samples.summary()
                expected = predicted_mean(prediction, h)
                runs.append({
                    'h': h,
                    'simulation': samples.config.to_dict(),
                    'summary': summary.to_dict(),
                    'predicted_mean': expected,
                    'ratio_to_prediction': summary.mean / expected if expected else None,
                    'provenance': provenance('mc', seed=run_seed, h=h)
                })
                if export:
                    export_exit_samples(samples, _suffixed(export, h))

        try:
            fit = arrhenius_fit([(r['h'], r['summary']['mean']) for r in runs]).to_dict()
        except InsufficientSamplesError as e:
            logger.warning(f"Arrhenius fit skipped: {e.message}")
            fit = None
        return {'mc': {'sweep': runs, 'arrhenius_fit': fit,
                       'start_distribution': self.config.get('mc.start_distribution')}}

    # --- spectrum ---------------------------------------------------------

    def _spectral_point(self, h: float, prediction: Optional[KramersPrediction]) -> dict:
        P = self.operator(h, 'P')
        P_star = self.operator(h, 'P*')
        eig_l = self.principal_l(h)
        method = self.config.get('spectral.method')
        eig_p = principal_eig(P, method)
        eig_p_star = principal_eig(P_star, method)

        landscape = self.optional_landscape()
        minima = landscape.interior_minima if landscape is not None else []
        threshold = small_eig_threshold([float(np.min(cp.eigenvalues)) for cp in minima], h,
                                        self.config.get('spectral.threshold_c'))
        small = small_eig_count(self.operator(h, 'ReP'), threshold,
                                m0=len(minima) if landscape is not None else None)

        point = {
            'h': h,
            'principal_L': eig_l.to_dict(),
            'principal_P': eig_p.to_dict(),
            'principal_P_star': eig_p_star.to_dict(),
            'p_over_2h_l': eig_p.value / (2.0 * h * eig_l.value),
            'small_eigenvalues': small.to_dict(),
            'transpose_defect': transpose_defect(P, P_star),
            'accretivity': accretivity_check(P, seed=int(self.config.get('landscape.seed'))),
            'qsd_identity': qsd_identity(self.operator(h, 'L')),
            'potential': P.potential,
            'provenance': self._grid_provenance(h)
        }

        x0 = landscape.x0 if landscape is not None else None
        start = self.config.get('mc.start')
        if x0 is None and start is not None:
            point['mean_exit_time_at_start'] = mean_exit_time_grid(self.operator(h, 'L')).at(start)
        if x0 is not None and landscape.report.verdicts.get('One-Well', False):
            report = landscape.report
            point['mean_exit_time_at_x0'] = mean_exit_time_grid(self.operator(h, 'L')).at(x0.location)
            eta = self.config.get('spectral.eta')
            eta = DEFAULT_ETA * report.barrier if eta is None else float(eta)
            point['concentration'] = eigenfunction_concentration(
                eig_p.vector, P, x0.f_value, report.boundary_min, eta).to_dict()
            point['concentration_adjoint'] = eigenfunction_concentration(
                eig_p_star.vector, P_star, x0.f_value, report.boundary_min, eta).to_dict()
        if prediction is not None:
            report = self.landscape.report
            delta = self.config.get('spectral.quasimode.delta1')
            delta = DEFAULT_COLLAR * self.problem.torus.period if delta is None else float(delta)
            point['quasimode'] = quasimode_rayleigh(
                P, self.problem.region, report.records, x0.f_value, report.boundary_min, delta,
                eps_rel=float(self.config.get('spectral.quasimode.eps_rel')),
                predicted=prediction.quasimode_energy(h)
            ).to_dict()
            point['lambda_predicted'] = prediction.lambda_(h, sided=True)
        return point

    def spectrum(self) -> dict:
        """温度の掃引で格子作用素のスペクトル診断を行う"""
        prediction = self.optional_prediction()
        export = self.config.get('spectral.export_csv')
        points = []
        with self.timer.stage('spectral'):
            for h in (float(v) for v in self.config.get('spectral.h_values')):
                points.append(self._spectral_point(h, prediction))
                if export:
                    export_eigenvector(self.operator(h, 'L'), self.principal_l(h).vector, _suffixed(export, h))
        stencil = {
            'potential': self.config.get('spectral.potential'),
            'method': self.config.get('spectral.method'),
            'n_per_axis': int(self.config.get('spectral.n_per_axis'))
        }
        logger.info(f"Spectral sweep used the {stencil['potential']} Witten potential "
                    f"on {stencil['n_per_axis']} nodes per axis ({stencil['method']})")
        return {'spectral': {'stencil': stencil, 'sweep': points}}

    # --- mam --------------------------------------------------------------

    def _t_values(self) -> List[float]:
        landscape = self.landscape
        report = landscape.report
        if landscape.x0 is not None:
            barrier = report.barrier
        else:
            barrier = report.boundary_min - min((cp.f_value for cp in landscape.interior_minima),
                                                default=report.boundary_min)
        return time_grid(self.problem.torus.period, barrier, self.config.get('action.t_factors'))

    def _minimize(self, x, y, t_values, initial_paths=()):
        return minimize_action(
            x, y, self.problem.drift, self.problem.torus, int(self.config.get('action.n_nodes')), t_values,
            region=self.problem.region, penalty=float(self.config.get('action.penalty')),
            initial_paths=initial_paths, max_iter=int(self.config.get('action.max_iter'))
        )

    def mam(self) -> dict:
        """x₀ から境界最小点への準ポテンシャルと W-グラフの評価"""
        landscape = self.landscape
        report = landscape.report
        problem = self.problem
        t_values = self._t_values()
        export = self.config.get('action.export_csv')
        n_nodes = int(self.config.get('action.n_nodes'))
        section = {'T_grid': t_values, 'n_segments': n_nodes}

        with self.timer.stage('action'):
            x0 = landscape.x0
            paths = []
            if x0 is not None:
                slack = LOWER_BOUND_SLACK * max(1.0, 2.0 * report.barrier)
                for k, record in enumerate(report.records):
                    z = record.point.z
                    initial = []
                    if record.saddle is not None and record.saddle.base is not None:
                        try:
                            initial.append(heteroclinic_path(problem.drift, x0, record.saddle.base, problem.torus,
                                                             dt=float(self.config.get('landscape.flow_dt'))))
                        except ActionError as e:
                            logger.warning(f"Heteroclinic initializer unavailable: {e.message}")
                    forward = self._minimize(x0.location, z, t_values, initial)
                    reverse = self._minimize(z, x0.location, t_values)
                    bound = action_lower_bound(forward.path, problem.f)
                    paths.append({
                        'z': z.tolist(),
                        'case': record.case,
                        'forward': forward.to_dict(),
                        'reverse': reverse.to_dict(),
                        'lower_bound': bound,
                        'lower_bound_ok': bound <= forward.value + slack,
                        'provenance': provenance('action', grid=n_nodes)
                    })
                    if export:
                        p = Path(export)
                        export_path(forward.path, p.with_name(f"{p.stem}_{k}{p.suffix or '.csv'}"))
            section['paths'] = paths
            section['wgraph'] = self._wgraph(t_values, paths)
        return {'action': section}

    def _wgraph(self, t_values: List[float], paths: List[dict]) -> Optional[dict]:
        minima = self.landscape.interior_minima
        p = len(minima)
        if p == 0:
            return None
        if p > MAX_STABLE_POINTS:
            logger.warning(f"W-graph skipped: {p} stable points exceed the cap of {MAX_STABLE_POINTS}")
            return None
        if p == 1 and paths:
            matrix = np.array([[0.0, min(item['forward']['value'] for item in paths)]])
        else:
            boundary = [m.z for m in self.landscape.report.boundary_minimizers]
            if not boundary:
                return None
            matrix = quasi_potential_matrix(
                [cp.location for cp in minima], boundary, self.problem.drift, self.problem.torus,
                int(self.config.get('action.n_nodes')), t_values, self.problem.region,
                float(self.config.get('action.penalty'))
            )
        result = wgraph_bound(matrix, [cp.location.tolist() for cp in minima]).to_dict()
        result['v_matrix'] = matrix.tolist()
        return result

    # --- report -----------------------------------------------------------

    def _leveling(self) -> dict:
        x0 = self.landscape.x0
        problem = self.problem
        starts = self.config.get('mc.leveling.starts')
        if starts is None:
            d = problem.dimension
            shift = LEVELING_OFFSET * problem.torus.period
            starts = [x0.location, x0.location + shift * np.eye(d)[0], x0.location - shift * np.eye(d)[d - 1]]
        h = float(self.config.get('mc.leveling.h'))
        seed = derived_seed(int(self.config.get('mc.seed')), 'leveling')
        cfg = SimConfig(
            h=h, dt=float(self.config.get('mc.dt')), n_paths=int(self.config.get('mc.leveling.n_paths')),
            starts=x0.location[None, :], seed=seed, max_steps=self._max_steps(h, self.optional_prediction()),
            block_size=int(self.config.get('mc.block_size')),
            chunk_steps=int(self.config.get('mc.chunk_steps')), threads=self.threads
        )

        def in_basin(s: np.ndarray) -> bool:
            return basin_membership(problem.region, x0, s, problem.drift, problem.f,
                                    self.landscape.critical_points, dt=float(self.config.get('landscape.flow_dt')))

        result = leveling_check(problem.drift, problem.region, cfg, starts, in_basin,
                                tolerance=float(self.config.get('report.thresholds.leveling_rel')))
        section = result.to_dict()
        section['provenance'] = provenance('mc', seed=seed, h=h)
        return section

    def _committor(self) -> dict:
        x0 = self.landscape.x0
        report = self.landscape.report
        torus = self.problem.torus
        center = self.config.get('mc.committor.center')
        center = x0.location if center is None else np.asarray(center, dtype=float)
        start = self.config.get('mc.committor.start')
        if start is None:
            z = report.records[0].point.z
            start = center + 0.5 * torus.minimage(z - center)
        h = float(self.config.get('mc.committor.h'))
        seed = derived_seed(int(self.config.get('mc.seed')), 'committor')
        cfg = SimConfig(
            h=h, dt=float(self.config.get('mc.dt')), n_paths=int(self.config.get('mc.committor.n_paths')),
            starts=np.atleast_2d(start), seed=seed, max_steps=self._max_steps(h, self.optional_prediction()),
            block_size=int(self.config.get('mc.block_size')),
            chunk_steps=int(self.config.get('mc.chunk_steps')), threads=self.threads
        )
        result = committor(self.problem.drift, self.problem.region, center,
                           float(self.config.get('mc.committor.radius')), start, cfg)
        section = result.to_dict()
        section.update({'start': np.asarray(start).tolist(), 'center': np.asarray(center).tolist(),
                        'provenance': provenance('mc', seed=seed, h=h)})
        return section

    def _exit_law(self) -> Tuple[dict, Optional[float]]:
        """指数脱出則の検定と λ₁^L·E[τ]"""
        h = float(self.config.get('mc.exit_law.h'))
        seed = derived_seed(int(self.config.get('mc.seed')), 'exit_law')
        samples = self.sample(h, int(self.config.get('mc.exit_law.n_paths')), seed)
        summary = samples.summary()
        lam = self.principal_l(h).value
        section = {'summary': summary.to_dict(), 'lambda_L': lam,
                   'provenance': provenance('mc', seed=seed, grid=int(self.config.get('spectral.n_per_axis')), h=h)}
        try:
            section['ks'] = exit_law_test(samples, lam, float(self.config.get('report.thresholds.ks_level'))).to_dict()
        except InsufficientSamplesError as e:
            logger.warning(f"Exit law test skipped: {e.message}")
            section['ks'] = None
        product = lam * summary.mean if summary.n_used else None
        section['lambda_times_mean'] = product
        return section, product

    def report(self) -> Tuple[dict, List[LedgerEntry]]:
        """
        全実験と相互検証

        Raises:
            AssumptionViolation: 予測の前提が成り立たない
        """
        thresholds = self.config.get('report.thresholds')
        sections = self.validate()
        sections.update(self.predict())
        two_delta = self.prediction.barrier * 2.0

        sections.update(self.simulate())
        with self.timer.stage('mc-checks'):
            exit_law, product = self._exit_law()
            sections['mc']['exit_law'] = exit_law
            sections['mc']['leveling'] = self._leveling()
            sections['mc']['committor'] = self._committor()
        sections.update(self.spectrum())
        sections.update(self.mam())

        sweep = sections['mc']['sweep']
        fit = sections['mc']['arrhenius_fit']
        ks = exit_law['ks']
        case2 = [{'forward': p['forward']['value'], 'reverse': p['reverse']['value'],
                  'lower_bound_ok': p['lower_bound_ok']} for p in sections['action']['paths'] if p['case'] == 2]
        entries = [
            ledger.arrhenius_entry(fit['two_delta'] if fit else None, two_delta, thresholds['arrhenius_rel']),
            ledger.qsd_entry(product, thresholds['qsd_low'], thresholds['qsd_high']),
            ledger.exit_law_entry(ks['p_value'] if ks else None, thresholds['ks_level']),
            ledger.leveling_entry(sections['mc']['leveling']['spread'], sections['mc']['leveling']['passed'],
                                  thresholds['leveling_rel']),
            ledger.prefactor_entry({r['h']: r['ratio_to_prediction'] for r in sweep},
                                   float(self.config.get('report.prefactor_h')),
                                   thresholds['prefactor_low'], thresholds['prefactor_high']),
            ledger.quasipotential_entry(case2, two_delta, thresholds['quasipotential_rel'],
                                        thresholds['reverse_action_max']),
            ledger.spectral_structure_entry(sections['spectral']['sweep']),
            ledger.quasimode_entry(sections['spectral']['sweep'], thresholds['quasimode_rel'])
        ]
        sections['cross_checks'] = {
            'lambda_times_mean_exit_time': product,
            'mc_over_prediction': {str(r['h']): r['ratio_to_prediction'] for r in sweep}
        }
        for entry in entries:
            log = logger.info if entry.passed else logger.warning
            log(f"Ledger {entry.criterion}: {'pass' if entry.passed else 'FAIL'}")
        return sections, entries


def run(command: str, config) -> dict:
    """
    コマンドを実行してレポートを返す

    Args:
        command: COMMANDS のいずれか
        config: ConfigManager

    Returns:
        JSON 化可能なレポート

    Raises:
        PreconditionError: 未知のコマンド
        AssumptionViolation: 予測を要するコマンドで仮定が成り立たない
    """
    if command not in COMMANDS:
        raise PreconditionError(f"Unknown command {command!r}; expected one of {COMMANDS}")
    lab = Lab(config)
    entries: List[LedgerEntry] = []
    if command == 'report':
        sections, entries = lab.report()
    else:
        sections = getattr(lab, command)()
    return ledger.build_report(command, config, sections, entries)
