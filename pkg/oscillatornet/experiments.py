# oscillatornet/experiments.py
import copy
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .experiment_config import ACCEPTANCE, REFERENCE_STENCILS, reference_values
from .mapping import exact_backward_stencil, forecast_partial, intersections, make_backward_stencil, map_to_hidden
from .models import CanonicalWeights, FitReport, ResNetWeights, SolverState, Trajectory
from .simulator import add_noise, damped_period, simulate_chain
from .solver import discrete_energy, free_forecast, step_single_conservative, verlet_amplitude
from .training import fit, fit_partial
from .utils.data_io import write_csv, write_json, write_text, write_trajectory_csv
from .utils.data_transform import continuation, forecast_frame, mapping_frame, peak_decay, relative_rmse, rmse
from .utils.data_validation import relative_errors
from .utils.errors import DivergedForecastError, InvalidArgumentError

logger = logging.getLogger(__name__)

MIN_SHORT_WINDOW = 5


@dataclass
class ReproduceResult:
    """單一表格 (或變體) 的重現結果。checks: {name: {value, limit, ok}}。"""
    table: int
    variant: Optional[str]
    name: str
    checks: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    report: Optional[FitReport] = None
    files: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return all(c['ok'] for c in self.checks.values())

    def check(self, name, value, limit, ok):
        self.checks[name] = {'value': value, 'limit': limit, 'ok': bool(ok)}

    def to_dict(self):
        return {
            'table': self.table,
            'variant': self.variant,
            'name': self.name,
            'passed': self.passed,
            'checks': self.checks,
            'report': self.report.to_dict() if self.report else None,
            'files': self.files,
        }


# ==========================================================
# 資料 (Data generation)
# ==========================================================

def training_window(cfg):
    """訓練點數；sub_quarter_period 取 (n−1)Δ 嚴格小於四分之一阻尼週期的最大 n (至少 5)。"""
    if cfg.window == 'full':
        return cfg.n_train
    quarter = damped_period(cfg.truth[0]) / 4
    n = int(np.floor(quarter / cfg.delta)) + 1
    while n > 1 and (n - 1) * cfg.delta >= quarter:
        n -= 1
    return max(n, MIN_SHORT_WINDOW)


def generate_data(cfg):
    """
    產生真值軌跡 (訓練窗 + 預測延續) 與可能加上雜訊的訓練資料。

    Returns:
    (truth, train)：truth 為完整軌跡 tuple，train 為訓練窗 tuple
    """
    n_train = training_window(cfg)
    truth = simulate_chain(cfg.truth, cfg.initial, cfg.delta, n_train + cfg.n_forecast)
    train = tuple(
        add_noise(tr.window(0, n_train), cfg.noise_std, cfg.seed + i) for i, tr in enumerate(truth)
    )
    return truth, train


def _out(out_dir, cfg, suffix):
    return os.path.join(out_dir, f"{cfg.name}_{suffix}")


def _init_weights(cfg):
    init = cfg.init if cfg.init is not None else cfg.truth
    return init[0] if cfg.system == 'single' else init


def _truth_weights(cfg):
    return cfg.truth[0] if cfg.system == 'single' else cfg.truth


# ==========================================================
# simulate / train / forecast / map
# ==========================================================

def run_simulate(cfg, out_dir):
    """模擬訓練窗 + 預測段，輸出 t,x1[,x2] CSV。"""
    if cfg.system == 'stencil':
        raise InvalidArgumentError(f"experiment {cfg.name!r} has no dynamical system to simulate")
    truth, _ = generate_data(cfg)
    path = write_trajectory_csv(_out(out_dir, cfg, 'trajectory.csv'), truth)
    logger.info("simulated %s: %d samples", cfg.name, len(truth[0]))
    return path, truth


def _fit(cfg, train, progress=False, **overrides):
    config = cfg.fit_config(progress=progress, **overrides)
    if cfg.observe == 'x1':
        return fit_partial(cfg.init or cfg.truth, train[0], cfg.mapping, config, truth=cfg.truth)
    observed = train[0] if cfg.system == 'single' else train
    init = _init_weights(cfg)
    if config.model == 'resnet':
        init = ResNetWeights(0.0)
    return fit(init, observed, config, truth=_truth_weights(cfg) if config.model != 'resnet' else None)


def _attach_reference(report, cfg, variant=None):
    if cfg.table is None:
        return report
    reference = reference_values(cfg.table, variant if variant is not None else cfg.variant)
    if reference:
        report.reference = reference
        report.rel_error_reference = relative_errors(
            {k: v for k, v in report.learned.items() if k in reference}, reference
        )
    return report


def _write_report(out_dir, cfg, report, title=None):
    files = [
        write_json(_out(out_dir, cfg, 'report.json'), report.to_dict()),
        write_text(_out(out_dir, cfg, 'report.txt'), report.to_table(title or cfg.name)),
    ]
    return files


def run_train(cfg, out_dir, progress=False):
    """訓練並輸出 JSON 報表與文字表格。"""
    if cfg.system == 'stencil':
        raise InvalidArgumentError(f"experiment {cfg.name!r} has nothing to train")
    truth, train = generate_data(cfg)
    report = _attach_reference(_fit(cfg, train, progress), cfg)
    files = _write_report(out_dir, cfg, report)
    return report, files


def _forecast(cfg, report, train, ifl=None):
    trainer = report.trainer
    if cfg.observe == 'x1':
        return forecast_partial(
            trainer.model, train[0], cfg.n_forecast,
            ifl=cfg.mapping.ifl if ifl is None else ifl,
            retrain=cfg.retrain, trainer=trainer,
        )
    seed = train[0] if cfg.system == 'single' else train
    return free_forecast(trainer.model, seed, cfg.n_forecast, retrain=cfg.retrain, trainer=trainer)


def run_forecast(cfg, out_dir, progress=False):
    """訓練後自由預測 n_forecast 點，輸出含 source 欄位的 CSV。"""
    if cfg.system == 'stencil':
        raise InvalidArgumentError(f"experiment {cfg.name!r} has nothing to forecast")
    truth, train = generate_data(cfg)
    report = _attach_reference(_fit(cfg, train, progress), cfg)
    forecast = _forecast(cfg, report, train)
    n_train = len(train[0])
    observed = truth[:1] if cfg.observe == 'x1' else truth
    forecast = (forecast,) if isinstance(forecast, Trajectory) else forecast
    peak = max(tr.amplitude() for tr in observed)
    cont = continuation(observed, n_train, cfg.n_forecast)
    report.extras['forecast_rmse'] = [rmse(f, c) for f, c in zip(forecast, cont)]
    report.extras['forecast_rmse_rel_peak'] = [relative_rmse(f, c, peak) for f, c in zip(forecast, cont)]
    files = [write_csv(forecast_frame(observed, forecast), _out(out_dir, cfg, 'forecast.csv'))]
    files += _write_report(out_dir, cfg, report)
    return report, forecast, files


def run_map(cfg, out_dir, progress=False):
    """部分觀測：訓練 mapping + 求解器，輸出映射 CSV 與 x1 預測 CSV。"""
    if cfg.observe != 'x1' or cfg.system != 'coupled':
        raise InvalidArgumentError(f"experiment {cfg.name!r} is not a partial-observation (x1 only) setup")
    truth, train = generate_data(cfg)
    report = _attach_reference(_fit(cfg, train, progress), cfg)
    model = report.trainer.model

    x1_all = truth[0]
    mapped = map_to_hidden(x1_all, model.mapping_params(), model.bank)
    df_map = mapping_frame(x1_all, truth[1], mapped, cfg.mapping.mode, cfg.mapping.padding)
    n_train = len(train[0])
    crossings = intersections(x1_all, truth[1])
    report.extras['intersections'] = [int(i) for i in crossings]

    forecast = forecast_partial(model, train[0], cfg.n_forecast, ifl=cfg.mapping.ifl)
    files = [
        write_csv(df_map, _out(out_dir, cfg, 'mapping.csv')),
        write_csv(forecast_frame(truth[:1], (forecast,)), _out(out_dir, cfg, 'forecast.csv')),
    ]
    cont = continuation(truth[:1], n_train, cfg.n_forecast)[0]
    report.extras['forecast_rmse'] = rmse(forecast, cont)
    files += _write_report(out_dir, cfg, report)
    return report, files


# ==========================================================
# reproduce
# ==========================================================

def _check_rel_errors(result, report, limit):
    for name, err in report.rel_error.items():
        result.check(f'rel_error_{name}', err, limit, err <= limit)


def _check_valid(result, report):
    result.check('learned_weights_valid', report.invalid, {}, report.valid)


def _check_frozen(result, report):
    for name, init in report.init.items():
        if name in report.trainable:
            continue
        value = report.learned[name]
        result.check(f'frozen_{name}', value, init, value == init)


def _conservative_energy(weights, x_prev, x_curr, delta, steps):
    # 單一濾波器 Verlet 迭代的離散能量相對漂移
    s = SolverState(x_prev, x_curr)
    e0 = discrete_energy(weights, s, delta)
    worst = 0.0
    for _ in range(steps):
        s = SolverState(s.x_curr, step_single_conservative(weights, s, delta))
        worst = max(worst, abs(discrete_energy(weights, s, delta) - e0) / abs(e0))
    return worst


def _reproduce_single(cfg, result, out_dir, progress):
    accept = ACCEPTANCE[cfg.table]
    truth, train = generate_data(cfg)
    report = _attach_reference(_fit(cfg, train, progress), cfg)
    result.report = report
    _check_rel_errors(result, report, accept['rel_error'])
    _check_valid(result, report)
    if cfg.table != 1:
        return

    n_train = len(train[0])
    peak = truth[0].amplitude()
    forecast = free_forecast(report.trainer.model, train[0], cfg.n_forecast, retrain=cfg.retrain, trainer=report.trainer)
    cont = continuation(truth, n_train, cfg.n_forecast)[0]
    err = relative_rmse(forecast, cont, peak)
    result.check('forecast_rmse_rel_peak', err, accept['forecast_rmse'], err <= accept['forecast_rmse'])
    extra = {}
    result.files.append(write_csv(forecast_frame(truth, (forecast,)), _out(out_dir, cfg, 'forecast.csv')))

    # 單一濾波器 (無阻尼) 版本：能量守恆、振幅不衰減
    conservative = fit(_init_weights(cfg), train[0], cfg.fit_config(progress=progress, model='conservative'))
    learned = conservative.learned
    w_cons = CanonicalWeights(learned['m'], 0.0, learned['k'])
    drift = _conservative_energy(w_cons, train[0].samples[-2], train[0].samples[-1], cfg.delta, accept['energy_steps'])
    result.check('conservative_energy_drift', drift, accept['energy_drift'], drift <= accept['energy_drift'])

    cons_forecast = free_forecast(conservative.trainer.model, train[0], cfg.n_forecast)
    history = np.concatenate([train[0].samples[-1:], cons_forecast.samples])
    amplitude = verlet_amplitude(w_cons, SolverState(history[:-1], history[1:]), cfg.delta)
    cons_decay = float(1.0 - amplitude[-1] / amplitude[0])
    truth_decay = peak_decay(cont.samples, len(cont) // 2)
    result.check('conservative_amplitude_decay', cons_decay, 0.01, abs(cons_decay) < 0.01)
    result.check('truth_decay', truth_decay, accept['truth_decay'], truth_decay > accept['truth_decay'])
    report.extras['conservative'] = {'learned': learned, 'amplitude_decay': cons_decay}
    extra['conservative'] = forecast_frame(truth, (cons_forecast,))

    # 一階 ResNet 基準：可能發散，記錄即可
    baseline = _fit(cfg, train, progress, model='resnet')
    try:
        res_forecast = free_forecast(baseline.trainer.model, train[0], cfg.n_forecast)
        report.extras['resnet'] = {
            'theta': baseline.learned['theta'],
            'forecast_rmse_rel_peak': relative_rmse(res_forecast, cont, peak),
        }
        extra['baseline'] = forecast_frame(truth, (res_forecast,))
    except DivergedForecastError as e:
        report.extras['resnet'] = {'theta': baseline.learned['theta'], 'diverged': str(e)}
    for label, df in extra.items():
        result.files.append(write_csv(df, _out(out_dir, cfg, f'forecast_{label}.csv')))


def _reproduce_coupled(cfg, result, out_dir, progress):
    accept = ACCEPTANCE[cfg.table]
    truth, train = generate_data(cfg)
    report = _attach_reference(_fit(cfg, train, progress), cfg)
    result.report = report
    _check_rel_errors(result, report, accept['rel_error'])
    _check_valid(result, report)
    forecast = free_forecast(report.trainer.model, train, cfg.n_forecast, retrain=cfg.retrain, trainer=report.trainer)
    peak = max(tr.amplitude() for tr in truth)
    cont = continuation(truth, len(train[0]), cfg.n_forecast)
    report.extras['forecast_rmse_rel_peak'] = [relative_rmse(f, c, peak) for f, c in zip(forecast, cont)]
    result.files.append(write_csv(forecast_frame(truth, forecast), _out(out_dir, cfg, 'forecast.csv')))


def _reproduce_stencils(cfg, result, out_dir):
    tol = ACCEPTANCE[4]['monomial_tol']
    for (order_d, order_a), expected in REFERENCE_STENCILS.items():
        exact = exact_backward_stencil(order_d, order_a)
        ok = exact == [Fraction(v) for v in expected]
        result.check(f'table_d{order_d}_order{order_a}', [str(v) for v in exact], list(expected), ok)

    rows = []
    delta, t_end = 0.5, 1.0
    for accuracy in cfg.stencil_orders:
        for order_d in (1, 2):
            s = make_backward_stencil(order_d, accuracy)
            t = t_end + delta * s.grid
            worst = 0.0
            for p in range(accuracy + 1):
                approx = float(np.dot(s.coefficients, t ** p)) / delta ** order_d
                if p < order_d:
                    exact = 0.0
                elif order_d == 1:
                    exact = p * t_end ** (p - 1)
                else:
                    exact = p * (p - 1) * t_end ** (p - 2)
                worst = max(worst, abs(approx - exact))
            result.check(f'monomials_d{order_d}_order{accuracy}', worst, tol, worst <= tol)
            rows.append({
                'derivative': order_d, 'accuracy': accuracy,
                'coefficients': ' '.join(str(v) for v in exact_backward_stencil(order_d, accuracy)),
            })
    result.files.append(write_csv(pd.DataFrame(rows), _out(out_dir, cfg, 'stencils.csv')))


def _reproduce_partial(cfg, result, out_dir, progress):
    accept = ACCEPTANCE[cfg.table]
    truth, train = generate_data(cfg)
    report = _attach_reference(_fit(cfg, train, progress), cfg)
    result.report = report
    _check_frozen(result, report)
    _check_valid(result, report)

    model = report.trainer.model
    mapped = map_to_hidden(truth[0], model.mapping_params(), model.bank)
    result.files.append(write_csv(
        mapping_frame(truth[0], truth[1], mapped, cfg.mapping.mode, cfg.mapping.padding),
        _out(out_dir, cfg, 'mapping.csv'),
    ))

    n_train = len(train[0])
    amplitude = train[0].amplitude()
    cont = continuation(truth[:1], n_train, cfg.n_forecast)[0]

    # 兩種預測各自用一份訓練器副本，互不影響
    forecasts = {}
    for ifl in (False, True):
        trainer = copy.deepcopy(report.trainer)
        try:
            forecasts[ifl] = forecast_partial(
                trainer.model, train[0], cfg.n_forecast, ifl=ifl, retrain=cfg.retrain, trainer=trainer,
            )
        except DivergedForecastError as e:
            report.extras[f"{'ifl' if ifl else 'no_ifl'}_diverged"] = str(e)
            forecasts[ifl] = None
        if ifl:
            report.extras['learned_ifl'] = trainer.model.values()
    for ifl, forecast in forecasts.items():
        if forecast is not None:
            label = 'forecast_ifl.csv' if ifl else 'forecast.csv'
            result.files.append(write_csv(forecast_frame(truth[:1], (forecast,)), _out(out_dir, cfg, label)))

    def _errors(forecast):
        if forecast is None:
            return np.full(cfg.n_forecast, np.inf)
        return np.abs(forecast.samples - cont.samples)

    err_no_ifl, err_ifl = _errors(forecasts[False]), _errors(forecasts[True])
    report.extras['forecast_error_no_ifl'] = err_no_ifl.tolist()
    report.extras['forecast_error_ifl'] = err_ifl.tolist()

    if cfg.table == 5:
        for name in ('k1', 'k2'):
            dev = abs(report.learned[name] - report.init[name])
            result.check(f'{name}_at_init', dev, accept['spring_tol'], dev < accept['spring_tol'])
        h = accept['ifl_horizon']
        if cfg.n_forecast < h:
            raise InvalidArgumentError(f"table 5 needs n_forecast >= {h}")
        rmse_ifl = float(np.sqrt(np.mean(err_ifl[:h] ** 2)))
        rmse_no_ifl = float(np.sqrt(np.mean(err_no_ifl[:h] ** 2)))
        result.check('ifl_better_at_horizon', rmse_ifl, rmse_no_ifl, rmse_ifl < rmse_no_ifl)
        p = accept['no_ifl_point']
        early = float(np.max(err_no_ifl[:p])) / amplitude
        result.check('no_ifl_error_by_point', early, accept['no_ifl_error'], early > accept['no_ifl_error'])
        reference_ifl = reference_values(5, 'ifl')
        report.extras['reference_ifl'] = reference_ifl
    if cfg.table == 8:
        e = report.learned['param_e']
        dev = abs(e - accept['param_e']) / accept['param_e']
        result.check('param_e_near_init', dev, accept['param_e_tol'], dev <= accept['param_e_tol'])


def reproduce_experiment(cfg, out_dir, progress=False):
    """依 cfg.table 執行對應的重現流程並寫出 <name>_reproduce.json。"""
    if cfg.table not in ACCEPTANCE:
        raise InvalidArgumentError(f"experiment {cfg.name!r} is not bound to a reproducible table")
    result = ReproduceResult(cfg.table, cfg.variant, cfg.name)
    logger.info("reproducing table %s (%s)", cfg.table, cfg.name)
    if cfg.table == 4:
        _reproduce_stencils(cfg, result, out_dir)
    elif cfg.observe == 'x1':
        _reproduce_partial(cfg, result, out_dir, progress)
    elif cfg.system == 'single':
        _reproduce_single(cfg, result, out_dir, progress)
    else:
        _reproduce_coupled(cfg, result, out_dir, progress)

    if result.report is not None:
        result.files += _write_report(out_dir, cfg, result.report, title=f"Table {cfg.table} {cfg.variant or ''}".strip())
    result.files.append(write_json(_out(out_dir, cfg, 'reproduce.json'), result.to_dict()))
    logger.info("table %s (%s): %s", cfg.table, cfg.name, 'passed' if result.passed else 'FAILED')
    return result
