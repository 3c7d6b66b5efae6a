# oscillatornet/experiment_config.py
import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from .models import CanonicalWeights, ChainSystem, FitConfig, InitialState, MappingConfig, RetrainPolicy
from .utils.const import (
    DEFAULT_COUPLED_STATE, DEFAULT_LEARNING_RATE, DEFAULT_LR_FLOOR, DEFAULT_MAX_ITERATIONS, DEFAULT_PATIENCE,
    DEFAULT_SINGLE_STATE, DEFAULT_STENCIL_ORDER, DEFAULT_TOLERANCE, DELTA,
)
from .utils.data_io import read_json
from .utils.data_validation import require_positive
from .utils.errors import InvalidArgumentError

SYSTEMS = ('single', 'coupled', 'chain', 'stencil')
OBSERVE = ('all', 'x1')
WINDOWS = ('full', 'sub_quarter_period')
MODELS = ('oscillator', 'conservative', 'resnet')


# ==========================================================
# 實驗設定 (Experiment configuration)
# ==========================================================

@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    table: Optional[int] = None
    variant: Optional[str] = None
    system: str = 'single'
    observe: str = 'all'
    model: str = 'oscillator'
    delta: float = DELTA
    n_train: int = 60
    n_forecast: int = 60
    window: str = 'full'
    truth: Optional[ChainSystem] = None
    init: Optional[ChainSystem] = None
    initial_state: Optional[InitialState] = None
    parametrization: str = 'canonical'
    reference_mass: Optional[float] = None
    mapping: MappingConfig = field(default_factory=MappingConfig)
    optimizer: str = 'adaptive_moments'
    learning_rate: float = DEFAULT_LEARNING_RATE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE
    patience: int = DEFAULT_PATIENCE
    lr_floor: float = DEFAULT_LR_FLOOR
    retrain: RetrainPolicy = field(default_factory=RetrainPolicy)
    noise_std: float = 0.0
    seed: int = 0
    stencil_orders: Tuple[int, ...] = (1, 2, 3, 4, DEFAULT_STENCIL_ORDER)
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise InvalidArgumentError(f"system must be one of {SYSTEMS} (got {self.system!r})")
        if self.observe not in OBSERVE:
            raise InvalidArgumentError(f"observe must be one of {OBSERVE}")
        if self.window not in WINDOWS:
            raise InvalidArgumentError(f"window must be one of {WINDOWS}")
        if self.model not in MODELS:
            raise InvalidArgumentError(f"model must be one of {MODELS}")
        require_positive('delta', self.delta)
        if self.n_train < 3:
            raise InvalidArgumentError(f"n_train must be >= 3 (got {self.n_train})")
        if self.n_forecast < 0:
            raise InvalidArgumentError("n_forecast must be >= 0")
        if self.noise_std < 0:
            raise InvalidArgumentError("noise_std must be >= 0")
        if self.system == 'stencil':
            return
        if self.truth is None:
            raise InvalidArgumentError(f"experiment {self.name!r} needs truth weights")
        expected = {'single': 1, 'coupled': 2}.get(self.system)
        if expected is not None and len(self.truth) != expected:
            raise InvalidArgumentError(f"{self.system} system needs {expected} oscillator(s), got {len(self.truth)}")
        if self.init is not None and len(self.init) != len(self.truth):
            raise InvalidArgumentError("init and truth must describe the same number of oscillators")
        if self.observe == 'x1' and self.system != 'coupled':
            raise InvalidArgumentError("partial observation is defined for the coupled system")
        if self.initial_state is not None and len(self.initial_state) != len(self.truth):
            raise InvalidArgumentError("initial_state does not match the number of oscillators")

    @property
    def oscillators(self):
        return len(self.truth) if self.truth is not None else 0

    @property
    def initial(self):
        if self.initial_state is not None:
            return self.initial_state
        default = DEFAULT_SINGLE_STATE if self.oscillators == 1 else DEFAULT_COUPLED_STATE
        if self.oscillators > 2:
            return InitialState((1.0,) + (0.0,) * (self.oscillators - 1), (0.0,) * self.oscillators)
        return InitialState(tuple(default['positions']), tuple(default['velocities']))

    def fit_config(self, progress=False, **overrides):
        cfg = FitConfig(
            learning_rate=self.learning_rate,
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            optimizer=self.optimizer,
            seed=self.seed,
            parametrization=self.parametrization,
            model=self.model,
            reference_mass=self.reference_mass,
            patience=self.patience,
            lr_floor=self.lr_floor,
            progress=progress,
        )
        return dataclasses.replace(cfg, **overrides) if overrides else cfg

    def with_overrides(self, **overrides):
        """CLI 旗標覆寫 (值為 None 的項目略過)。mapping 相關鍵直接寫進 MappingConfig。"""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        mapping_keys = {'kernel', 'padding', 'stencil_order', 'ifl', 'hidden_init'}
        mapping = {k: overrides.pop(k) for k in list(overrides) if k in mapping_keys}
        if mapping:
            overrides['mapping'] = dataclasses.replace(self.mapping, **mapping)
        return dataclasses.replace(self, **overrides) if overrides else self


# ==========================================================
# 內部輔助函式 (Internal Helper Functions)
# ==========================================================

_KNOWN_KEYS = {
    'name', 'table', 'variant', 'system', 'observe', 'model', 'delta', 'n_train', 'n_forecast', 'window',
    'truth', 'init', 'initial_state', 'parametrization', 'reference_mass', 'mapping', 'optimizer', 'retrain',
    'noise_std', 'seed', 'stencil_orders', 'output_dir', 'description',
}


def _chain(raw, key, path):
    if raw is None:
        return None
    if not isinstance(raw, list) or not raw:
        raise InvalidArgumentError(f"{path}: {key} must be a non-empty list of oscillators")
    try:
        return ChainSystem(tuple(
            CanonicalWeights(float(o['mass']), float(o.get('damping', 0.0)), float(o['spring'])) for o in raw
        ))
    except (KeyError, TypeError) as e:
        raise InvalidArgumentError(f"{path}: each {key} oscillator needs mass and spring ({e})") from e


def _section(raw, key, path):
    section = raw.get(key) or {}
    if not isinstance(section, dict):
        raise InvalidArgumentError(f"{path}: {key} must be an object")
    return section


def parse_experiment(raw: Dict[str, Any], path: str = '<config>', defaults: Optional[Dict[str, Any]] = None):
    """
    JSON dict → ExperimentConfig。defaults 為 app config (DELTA, SEED, OUTPUT_DIR)。
    """
    defaults = defaults or {}
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise InvalidArgumentError(f"{path}: unknown keys {sorted(unknown)}")

    optimizer = _section(raw, 'optimizer', path)
    mapping = _section(raw, 'mapping', path)
    retrain = _section(raw, 'retrain', path)
    state = raw.get('initial_state')

    kwargs = dict(
        name=raw.get('name') or os.path.splitext(os.path.basename(path))[0],
        table=raw.get('table'),
        variant=raw.get('variant'),
        system=raw.get('system', 'single'),
        observe=raw.get('observe', 'all'),
        model=raw.get('model', 'oscillator'),
        delta=float(raw.get('delta', defaults.get('DELTA', DELTA))),
        n_train=int(raw.get('n_train', 60)),
        n_forecast=int(raw.get('n_forecast', 60)),
        window=raw.get('window', 'full'),
        truth=_chain(raw.get('truth'), 'truth', path),
        init=_chain(raw.get('init'), 'init', path),
        initial_state=InitialState(tuple(state['positions']), tuple(state['velocities'])) if state else None,
        parametrization=raw.get('parametrization', 'canonical'),
        reference_mass=raw.get('reference_mass'),
        mapping=MappingConfig(
            kernel=int(mapping.get('kernel', 1)),
            padding=mapping.get('padding', 'valid'),
            stencil_order=int(mapping.get('stencil_order', DEFAULT_STENCIL_ORDER)),
            ifl=bool(mapping.get('ifl', False)),
            hidden_init=mapping.get('hidden_init', 'truth'),
        ),
        optimizer=optimizer.get('name', 'adaptive_moments'),
        learning_rate=float(optimizer.get('learning_rate', DEFAULT_LEARNING_RATE)),
        max_iterations=int(optimizer.get('max_iterations', DEFAULT_MAX_ITERATIONS)),
        tolerance=float(optimizer.get('tolerance', DEFAULT_TOLERANCE)),
        patience=int(optimizer.get('patience', DEFAULT_PATIENCE)),
        lr_floor=float(optimizer.get('lr_floor', DEFAULT_LR_FLOOR)),
        retrain=RetrainPolicy(retrain.get('policy', 'none'), int(retrain.get('iterations', 50))),
        noise_std=float(raw.get('noise_std', 0.0)),
        seed=int(raw.get('seed', defaults.get('SEED', 0))),
        output_dir=raw.get('output_dir', defaults.get('OUTPUT_DIR')),
    )
    if 'stencil_orders' in raw:
        kwargs['stencil_orders'] = tuple(int(v) for v in raw['stencil_orders'])
    return ExperimentConfig(**kwargs)


def load_experiment(path: str, defaults: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """讀取 experiments/*.json (Load one experiment file)."""
    return parse_experiment(read_json(path), path, defaults)


# ==========================================================
# 表格登錄 (Table registry)
# ==========================================================

# table id → 設定檔 (變體各自一個檔案)
TABLES = {
    1: ('table1.json',),
    2: ('table2.json',),
    3: ('table3.json',),
    4: ('table4.json',),
    5: ('table5.json',),
    6: ('table6_valid.json', 'table6_causal.json'),
    7: ('table7_causal.json', 'table7_valid.json'),
    8: ('table8.json',),
}


def table_config_paths(table_id, experiments_dir):
    if table_id not in TABLES:
        raise InvalidArgumentError(f"table must be one of {sorted(TABLES)} (got {table_id})")
    return [os.path.join(experiments_dir, name) for name in TABLES[table_id]]


# 發表的數值，只在訓練結束後比較 (post-hoc comparison only)
REFERENCE_VALUES = {
    (1, None): {'m': 2.058, 'b': 1.487, 'k': 40.249},
    (2, None): {'m': 1.918, 'b': 1.343, 'k': 38.80},
    (3, None): {'m1': 1.514, 'm2': 0.906, 'b1': 0.483, 'b2': 0.297, 'k1': 14.013, 'k2': 34.472},
    (5, None): {'m1': 1.535, 'b1': 0.216, 'k1': 15.000, 'k2': 15.000},
    (5, 'ifl'): {'m1': 1.089, 'b1': 0.090, 'k1': 15.000, 'k2': 15.000},
    (6, 'valid'): {'m1': 1.112, 'b1': 0.908, 'k1': 14.959, 'k2': 14.827},
    (6, 'causal'): {'m1': 1.173, 'b1': 0.487, 'k1': 14.558, 'k2': 15.091},
    (7, 'causal'): {'param_a': 0.054, 'param_b': 0.074, 'param_c': 0.002, 'param_d': 0.022, 'param_e': 1.647},
    (7, 'valid'): {'param_a': 0.062, 'param_b': 0.074, 'param_c': 0.048, 'param_d': 0.022, 'param_e': 1.956},
    (8, None): {'param_a': 0.065, 'param_b': 0.074, 'param_c': 0.009, 'param_d': 0.022, 'param_e': 1.999},
}

# 表 4 的二階精度 stencil (oldest grid point first)
REFERENCE_STENCILS = {
    (1, 2): ('1/2', '-2', '3/2'),
    (2, 2): ('-1', '4', '-5', '2'),
}

# 各表的驗收門檻
ACCEPTANCE = {
    1: {'rel_error': 0.05, 'forecast_rmse': 0.05, 'energy_drift': 1e-10, 'truth_decay': 0.05, 'energy_steps': 1000},
    2: {'rel_error': 0.12},
    3: {'rel_error': 0.05},
    4: {'monomial_tol': 1e-10},
    5: {'frozen_exact': True, 'spring_tol': 5e-4, 'ifl_horizon': 10, 'no_ifl_point': 5, 'no_ifl_error': 0.20},
    6: {'frozen_exact': True},
    7: {'frozen_exact': True},
    8: {'frozen_exact': True, 'param_e': 2.0, 'param_e_tol': 0.05},
}


def reference_values(table_id, variant=None):
    return REFERENCE_VALUES.get((table_id, variant)) or REFERENCE_VALUES.get((table_id, None))
