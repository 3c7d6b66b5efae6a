import os

import pytest

from oscillatornet.experiment_config import (
    ACCEPTANCE, REFERENCE_VALUES, TABLES, load_experiment, parse_experiment, reference_values, table_config_paths,
)
from oscillatornet.utils.const import BASE_DIR, DELTA
from oscillatornet.utils.errors import DataFileError, InvalidArgumentError

EXPERIMENTS_DIR = os.path.join(BASE_DIR, 'experiments')

SINGLE = {
    'name': 'single',
    'system': 'single',
    'truth': [{'mass': 2.0, 'damping': 1.5, 'spring': 40.0}],
    'init': [{'mass': 1.0, 'damping': 1.0, 'spring': 15.0}],
}


def test_defaults_fill_the_gaps():
    cfg = parse_experiment(SINGLE)
    assert cfg.delta == DELTA
    assert cfg.n_train == 60
    assert cfg.mapping.kernel == 1
    assert cfg.initial.positions == (1.0,)
    assert cfg.fit_config().learning_rate == cfg.learning_rate


def test_app_defaults_apply_when_the_file_is_silent():
    cfg = parse_experiment(SINGLE, defaults={'DELTA': 0.05, 'SEED': 7, 'OUTPUT_DIR': 'elsewhere'})
    assert (cfg.delta, cfg.seed, cfg.output_dir) == (0.05, 7, 'elsewhere')
    cfg = parse_experiment(dict(SINGLE, delta=0.1, seed=1), defaults={'DELTA': 0.05, 'SEED': 7})
    assert (cfg.delta, cfg.seed) == (0.1, 1)


def test_overrides_reach_the_mapping():
    cfg = parse_experiment(dict(SINGLE, system='coupled', observe='x1', truth=SINGLE['truth'] * 2, init=SINGLE['init'] * 2))
    cfg = cfg.with_overrides(padding='causal', kernel=25, ifl=True, seed=None)
    assert cfg.mapping.padding == 'causal'
    assert cfg.mapping.kernel == 25
    assert cfg.mapping.ifl
    assert cfg.seed == 0


@pytest.mark.parametrize('raw', [
    dict(SINGLE, colour='red'),
    dict(SINGLE, system='triple'),
    dict(SINGLE, n_train=0),
    dict(SINGLE, truth=None),
    dict(SINGLE, truth=[{'damping': 1.0}]),
    dict(SINGLE, observe='x1'),
    dict(SINGLE, truth=SINGLE['truth'] * 2),
])
def test_invalid_configs(raw):
    with pytest.raises(InvalidArgumentError):
        parse_experiment(raw)


def test_missing_config_file(tmp_path):
    with pytest.raises(DataFileError):
        load_experiment(str(tmp_path / 'missing.json'))


@pytest.mark.parametrize('table_id', sorted(TABLES))
def test_checked_in_tables_load(table_id):
    for path in table_config_paths(table_id, EXPERIMENTS_DIR):
        cfg = load_experiment(path)
        assert cfg.table == table_id
        assert table_id in ACCEPTANCE


def test_unknown_table():
    with pytest.raises(InvalidArgumentError):
        table_config_paths(9, EXPERIMENTS_DIR)


def test_reference_values_fall_back_to_the_table():
    assert reference_values(1) == REFERENCE_VALUES[(1, None)]
    assert reference_values(6, 'causal')['m1'] == 1.173
    assert reference_values(5, 'ifl')['m1'] == 1.089
    assert reference_values(4) is None
