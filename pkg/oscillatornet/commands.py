# oscillatornet/commands.py
import logging
import os

import click
from flask import Blueprint, current_app

from .experiment_config import TABLES, load_experiment, table_config_paths
from .experiments import reproduce_experiment, run_forecast, run_map, run_simulate, run_train
from .utils.const import EXIT_ACCEPTANCE_FAILURE
from .utils.data_validation import fmt
from .utils.errors import OscillatorNetError

logger = logging.getLogger(__name__)

# ======================
# CLI Blueprint (flask <command>)
# ======================
cli_bp = Blueprint('oscillatornet', __name__, cli_group=None)


# ==========================================================
# 內部輔助函式 (Internal Helper Functions)
# ==========================================================

def _defaults():
    return {k: current_app.config[k] for k in ('DELTA', 'SEED', 'OUTPUT_DIR')}


def _load(config_path, **overrides):
    cfg = load_experiment(config_path, _defaults())
    return cfg.with_overrides(**overrides)


def _out_dir(out, cfg=None):
    # CLI > 設定檔 > app config
    if out:
        return out
    if cfg is not None and cfg.output_dir:
        return cfg.output_dir
    return current_app.config['OUTPUT_DIR']


def _progress():
    return bool(current_app.config.get('PROGRESS', False))


def _echo_report(report):
    for name, value in report.learned.items():
        err = report.rel_error.get(name)
        suffix = f"  (rel. error {fmt(err)})" if err is not None else ''
        click.echo(f"  {name:<8} {fmt(value)}{suffix}")
    _echo_warnings(report)


def _echo_warnings(report):
    if report.invalid:
        click.echo(f"  ⚠ invalid learned weights: {report.invalid}")
    collapsed = report.extras.get('collapsed')
    if collapsed:
        click.echo(f"  ⚠ collapsed towards zero: {', '.join(collapsed)}")


def _echo_files(files):
    for path in files:
        click.echo(f"  → {path}")


def _fail(e):
    logger.error("%s", e)
    raise click.ClickException(str(e)) from e


config_option = click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
                             help='experiments/*.json')
out_option = click.option('--out', default=None, type=click.Path(file_okay=False), help='輸出資料夾')
seed_option = click.option('--seed', default=None, type=int, help='覆寫設定檔的 seed')
ifl_option = click.option('--ifl/--no-ifl', default=None, help='部分觀測時使用 inner feedback loop')


def mapping_options(f):
    # 部分觀測 (只看 x1) 的 mapping 設定，forecast 與 map 共用
    f = click.option('--stencil-order', default=None, type=click.IntRange(1, 8))(f)
    f = click.option('--kernel', default=None, type=click.Choice(['1', '25']))(f)
    f = click.option('--padding', default=None, type=click.Choice(['causal', 'valid']))(f)
    return f


def _mapping_overrides(padding, kernel, stencil_order):
    return {'padding': padding, 'kernel': int(kernel) if kernel else None, 'stencil_order': stencil_order}


# ==========================================================
# 指令 (Commands)
# ==========================================================

@cli_bp.cli.command('simulate')
@config_option
@out_option
@seed_option
@click.option('--n', 'n_train', default=None, type=int, help='覆寫訓練點數')
def simulate_command(config_path, out, seed, n_train):
    """模擬真值軌跡並寫出 CSV (t,x1[,x2])。"""
    try:
        cfg = _load(config_path, seed=seed, n_train=n_train)
        path, truth = run_simulate(cfg, _out_dir(out, cfg))
    except OscillatorNetError as e:
        _fail(e)
    click.echo(f"✅ simulated {len(truth[0])} samples → {path}")


@cli_bp.cli.command('train')
@config_option
@out_option
@seed_option
def train_command(config_path, out, seed):
    """訓練 OscillatorNet 並寫出報表 (JSON + 表格)。"""
    try:
        cfg = _load(config_path, seed=seed)
        report, files = run_train(cfg, _out_dir(out, cfg), progress=_progress())
    except OscillatorNetError as e:
        _fail(e)
    click.echo(f"✅ {cfg.name}: {report.iterations} iterations, final loss {report.final_loss:.3e}")
    _echo_report(report)
    _echo_files(files)


@cli_bp.cli.command('forecast')
@config_option
@out_option
@seed_option
@ifl_option
@mapping_options
def forecast_command(config_path, out, seed, ifl, padding, kernel, stencil_order):
    """訓練後自由預測，寫出含 source 欄位的 CSV。"""
    try:
        cfg = _load(config_path, seed=seed, ifl=ifl, **_mapping_overrides(padding, kernel, stencil_order))
        report, forecast, files = run_forecast(cfg, _out_dir(out, cfg), progress=_progress())
    except OscillatorNetError as e:
        _fail(e)
    click.echo(f"✅ {cfg.name}: forecast {len(forecast[0])} points")
    for i, err in enumerate(report.extras['forecast_rmse_rel_peak'], start=1):
        click.echo(f"  x{i} RMSE / peak = {fmt(err, 4)}")
    _echo_files(files)


@cli_bp.cli.command('map')
@config_option
@out_option
@seed_option
@ifl_option
@mapping_options
def map_command(config_path, out, seed, ifl, padding, kernel, stencil_order):
    """只觀測 x1：訓練 mapping，寫出 x2 重建與 x1 預測 CSV。"""
    try:
        cfg = _load(config_path, seed=seed, ifl=ifl, **_mapping_overrides(padding, kernel, stencil_order))
        report, files = run_map(cfg, _out_dir(out, cfg), progress=_progress())
    except OscillatorNetError as e:
        _fail(e)
    click.echo(f"✅ {cfg.name}: mapping {cfg.mapping.mode}, padding {cfg.mapping.padding}")
    _echo_report(report)
    _echo_files(files)


@cli_bp.cli.command('reproduce')
@click.option('--table', 'table_id', default=None, type=click.Choice([str(t) for t in TABLES]))
@click.option('--all', 'run_all', is_flag=True, help='依序重現所有表格')
@out_option
@seed_option
@click.option('--experiments-dir', default=None, type=click.Path(file_okay=False))
@click.pass_context
def reproduce_command(ctx, table_id, run_all, out, seed, experiments_dir):
    """重現表格並檢查驗收條件；有任何條件未通過時結束碼為 2。"""
    if bool(table_id) == run_all:
        raise click.UsageError('give exactly one of --table N or --all')
    tables = sorted(TABLES) if run_all else [int(table_id)]
    experiments_dir = experiments_dir or current_app.config['EXPERIMENTS_DIR']
    out_dir = out or current_app.config['OUTPUT_DIR']

    failed = []
    for table in tables:
        try:
            for path in table_config_paths(table, experiments_dir):
                cfg = _load(path, seed=seed)
                result = reproduce_experiment(cfg, os.path.join(out_dir, f'table{table}'), progress=_progress())
                mark = '✅' if result.passed else '❌'
                click.echo(f"{mark} Table {table} ({cfg.name})")
                for name, check in result.checks.items():
                    if not check['ok']:
                        click.echo(f"    ✗ {name}: {check['value']} (limit {check['limit']})")
                if result.report is not None:
                    click.echo(result.report.to_table(f"Table {table}"))
                    _echo_warnings(result.report)
                if not result.passed:
                    failed.append(cfg.name)
        except OscillatorNetError as e:
            _fail(e)

    if failed:
        click.echo(f"❌ acceptance failed: {', '.join(failed)}")
        ctx.exit(EXIT_ACCEPTANCE_FAILURE)
    click.echo(f"✅ all checks passed ({len(tables)} table(s))")
