from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .utils.const import (
    DEFAULT_LEARNING_RATE, DEFAULT_LR_FLOOR, DEFAULT_MAX_ITERATIONS, DEFAULT_PATIENCE,
    DEFAULT_RETRAIN_ITERATIONS, DEFAULT_STENCIL_ORDER, DEFAULT_TOLERANCE, MAX_STENCIL_ACCURACY,
    PADDING_MODES, PARAM_UNITS, SUPPORTED_KERNELS,
)
from .utils.data_validation import (
    fmt, require_finite, require_non_negative, require_positive,
)
from .utils.errors import InvalidArgumentError


def _frozen_array(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


# ==========================================================
# 時間序列 (Trajectory)
# ==========================================================

@dataclass(frozen=True)
class Trajectory:
    """
    等間隔取樣的一維位置序列 (Uniformly sampled scalar time series).

    samples 單位為公尺，delta 為取樣間隔 Δ [s]，t0 為第一個樣本的時間。
    """
    samples: np.ndarray
    delta: float
    t0: float = 0.0

    def __post_init__(self):
        require_positive('delta', self.delta)
        object.__setattr__(self, 'samples', _frozen_array(require_finite('samples', self.samples)))

    def __len__(self):
        return len(self.samples)

    @property
    def times(self):
        return self.t0 + self.delta * np.arange(len(self.samples))

    @property
    def t_end(self):
        return self.t0 + self.delta * (len(self.samples) - 1)

    def window(self, start, stop=None):
        # 取子區間，保持時間軸對齊
        stop = len(self.samples) if stop is None else stop
        return Trajectory(self.samples[start:stop], self.delta, self.t0 + start * self.delta)

    def amplitude(self):
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0


# ==========================================================
# 權重 (Weights records)
# ==========================================================

@dataclass(frozen=True)
class CanonicalWeights:
    """單一振子的正則權重 W = [m, b, k] (SI units)。"""
    mass: Any
    damping: Any
    spring: Any
    checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.checked:
            require_positive('mass', self.mass)
            require_non_negative('damping', self.damping)
            require_positive('spring', self.spring)

    def as_dict(self):
        return {'m': self.mass, 'b': self.damping, 'k': self.spring}


@dataclass(frozen=True)
class ChainSystem:
    """
    一串以彈簧相連的振子 (Linear chain, wall on the left).

    振子 i 透過 k_i 連到振子 i-1 (振子 1 連到牆)，每個振子有各自對地的阻尼 b_i。
    """
    oscillators: Tuple[CanonicalWeights, ...]

    def __post_init__(self):
        oscillators = tuple(self.oscillators)
        if not oscillators:
            raise InvalidArgumentError("a chain needs at least one oscillator")
        object.__setattr__(self, 'oscillators', oscillators)

    def __len__(self):
        return len(self.oscillators)

    def __getitem__(self, i):
        return self.oscillators[i]

    def as_dict(self):
        # 與報表一致的順序: m1, m2, ..., b1, b2, ..., k1, k2, ...
        n = len(self.oscillators)
        out = {}
        for attr, prefix in (('mass', 'm'), ('damping', 'b'), ('spring', 'k')):
            for i in range(n):
                out[f'{prefix}{i + 1}'] = getattr(self.oscillators[i], attr)
        return out


@dataclass(frozen=True)
class CombinedWeights:
    """只帶 [1/s] 與 [1/s^2] 單位的組合權重 U (parameters a–e)。"""
    param_a: Any
    param_b: Any
    param_c: Any
    param_d: Any
    param_e: Any
    checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.checked:
            require_positive('param_a', self.param_a)
            require_positive('param_b', self.param_b)
            require_non_negative('param_c', self.param_c)
            require_non_negative('param_d', self.param_d)
            require_positive('param_e', self.param_e)

    def as_dict(self):
        return {
            'param_a': self.param_a, 'param_b': self.param_b, 'param_c': self.param_c,
            'param_d': self.param_d, 'param_e': self.param_e,
        }


@dataclass(frozen=True)
class ResNetWeights:
    """一階 ResNet 基準模型的線性增益 θ [1/s]。"""
    theta: Any = 0.0

    def as_dict(self):
        return {'theta': self.theta}


# ==========================================================
# Mapping / stencil
# ==========================================================

@dataclass(frozen=True)
class Stencil:
    """
    向後差分係數 (Backward finite-difference coefficients).

    index 0 為最舊的格點，最後一個 index 對應目前時間 t。
    """
    derivative_order: int
    accuracy_order: int
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', _frozen_array(self.coefficients))

    def __len__(self):
        return len(self.coefficients)

    @property
    def grid(self):
        return np.arange(-(len(self.coefficients) - 1), 1)


@dataclass(frozen=True)
class StencilBank:
    d1: Stencil
    d2: Stencil
    accuracy_order: int

    def __post_init__(self):
        if self.d1.accuracy_order != self.accuracy_order or self.d2.accuracy_order != self.accuracy_order:
            raise InvalidArgumentError("stencils in a bank must share the accuracy order")
        if self.d1.derivative_order != 1 or self.d2.derivative_order != 2:
            raise InvalidArgumentError("a stencil bank holds a first and a second derivative stencil")


@dataclass(frozen=True)
class MappingParams:
    """
    x1 → x2 映射參數：投影 (α, β, γ) 或自由的寬 kernel，二擇一。
    """
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    wide_kernel: Optional[np.ndarray] = None
    padding: str = 'valid'
    stencil_accuracy: int = DEFAULT_STENCIL_ORDER

    def __post_init__(self):
        projection = (self.alpha, self.beta, self.gamma)
        has_projection = all(v is not None for v in projection)
        has_kernel = self.wide_kernel is not None
        if has_projection == has_kernel or (not has_projection and any(v is not None for v in projection)):
            raise InvalidArgumentError("exactly one of (alpha, beta, gamma) or wide_kernel must be set")
        if has_kernel:
            kernel = np.asarray(self.wide_kernel, dtype=np.float64)
            if kernel.ndim != 1 or len(kernel) % 2 == 0:
                raise InvalidArgumentError("wide_kernel must be a 1-d vector of odd length")
            object.__setattr__(self, 'wide_kernel', _frozen_array(kernel))
        if self.padding not in PADDING_MODES:
            raise InvalidArgumentError(f"padding must be one of {PADDING_MODES} (got {self.padding!r})")
        if not 1 <= int(self.stencil_accuracy) <= MAX_STENCIL_ACCURACY:
            raise InvalidArgumentError(f"stencil_accuracy must lie in [1, {MAX_STENCIL_ACCURACY}]")

    @property
    def is_projection(self):
        return self.wide_kernel is None


@dataclass(frozen=True)
class MappingConfig:
    kernel: int = 1
    padding: str = 'valid'
    stencil_order: int = DEFAULT_STENCIL_ORDER
    ifl: bool = False
    hidden_init: str = 'truth'

    def __post_init__(self):
        if self.kernel not in SUPPORTED_KERNELS:
            raise InvalidArgumentError(f"mapping kernel must be one of {SUPPORTED_KERNELS}")
        if self.padding not in PADDING_MODES:
            raise InvalidArgumentError(f"padding must be one of {PADDING_MODES}")
        if not 1 <= self.stencil_order <= MAX_STENCIL_ACCURACY:
            raise InvalidArgumentError(f"stencil order must lie in [1, {MAX_STENCIL_ACCURACY}]")
        if self.hidden_init not in ('truth', 'init'):
            raise InvalidArgumentError("hidden_init must be 'truth' or 'init'")

    @property
    def mode(self):
        return 'shared' if self.kernel == 1 else 'wide'


# ==========================================================
# Simulator / solver
# ==========================================================

@dataclass(frozen=True)
class InitialState:
    positions: Tuple[float, ...]
    velocities: Tuple[float, ...]

    def __post_init__(self):
        positions = tuple(float(v) for v in require_finite('positions', np.atleast_1d(self.positions)))
        velocities = tuple(float(v) for v in require_finite('velocities', np.atleast_1d(self.velocities)))
        if len(positions) != len(velocities):
            raise InvalidArgumentError("positions and velocities must have the same length")
        object.__setattr__(self, 'positions', positions)
        object.__setattr__(self, 'velocities', velocities)

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True)
class SolverState:
    """差分步的輸入 (x_{t-Δ}, x_t)；耦合系統時每個欄位是一個向量。"""
    x_prev: Any
    x_curr: Any


@dataclass(frozen=True)
class RetrainPolicy:
    policy: str = 'none'
    iterations: int = DEFAULT_RETRAIN_ITERATIONS

    def __post_init__(self):
        if self.policy not in ('none', 'per_step'):
            raise InvalidArgumentError("retrain policy must be 'none' or 'per_step'")
        if self.iterations < 1:
            raise InvalidArgumentError("retrain iterations must be >= 1")


# ==========================================================
# Training
# ==========================================================

@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE
    optimizer: str = 'adaptive_moments'
    seed: int = 0
    parametrization: str = 'canonical'
    model: str = 'oscillator'
    reference_mass: Optional[float] = None
    patience: int = DEFAULT_PATIENCE
    lr_floor: float = DEFAULT_LR_FLOOR
    frozen: Tuple[str, ...] = ()
    progress: bool = False

    def __post_init__(self):
        require_positive('learning_rate', self.learning_rate)
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.optimizer not in ('plain_gd', 'adaptive_moments'):
            raise InvalidArgumentError(f"unknown optimizer {self.optimizer!r}")
        if self.parametrization not in ('canonical', 'combined'):
            raise InvalidArgumentError(f"unknown parametrization {self.parametrization!r}")
        if self.model not in ('oscillator', 'conservative', 'resnet'):
            raise InvalidArgumentError(f"unknown model {self.model!r}")
        if self.reference_mass is not None:
            require_positive('reference_mass', self.reference_mass)
        if not 0 < self.lr_floor <= 1:
            raise InvalidArgumentError("lr_floor must lie in (0, 1]")
        object.__setattr__(self, 'frozen', tuple(self.frozen))


@dataclass
class FitReport:
    """
    訓練結果報表 (Fit report)，欄位：True value / learned / Init.

    rel_error 為 |learned − true| / |true|，只在有真值時計算。
    """
    learned: Dict[str, float]
    init: Dict[str, float]
    truth: Optional[Dict[str, float]]
    rel_error: Dict[str, float]
    loss_history: List[float]
    parametrization: str
    trainable: Tuple[str, ...]
    iterations: int
    converged: bool
    reference: Optional[Dict[str, float]] = None
    rel_error_reference: Optional[Dict[str, float]] = None
    invalid: Dict[str, float] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)
    trainer: Any = field(default=None, repr=False, compare=False)

    @property
    def valid(self):
        # 學到的權重是否仍滿足 m, k > 0、b ≥ 0
        return not self.invalid

    @property
    def final_loss(self):
        return self.loss_history[-1] if self.loss_history else float('nan')

    def to_dict(self):
        return {
            'parametrization': self.parametrization,
            'learned': self.learned,
            'init': self.init,
            'truth': self.truth,
            'rel_error': self.rel_error,
            'reference': self.reference,
            'rel_error_reference': self.rel_error_reference,
            'invalid': self.invalid,
            'trainable': list(self.trainable),
            'iterations': self.iterations,
            'converged': self.converged,
            'final_loss': self.final_loss,
            'loss_history': self.loss_history,
            'extras': self.extras,
        }

    def to_frame(self):
        rows = []
        for name, value in self.learned.items():
            rows.append({
                'parameter': f"{name} [{PARAM_UNITS.get(name, '-')}]",
                'True value': self.truth.get(name) if self.truth else None,
                'OscillatorNet': value,
                'Init.': self.init.get(name),
                'rel. error': self.rel_error.get(name),
                'reference': self.reference.get(name) if self.reference else None,
            })
        return pd.DataFrame(rows)

    def to_table(self, title=''):
        df = self.to_frame().dropna(axis=1, how='all')
        for col in df.columns[1:]:
            df[col] = df[col].apply(lambda v: fmt(v, 3))
        text = df.to_string(index=False)
        return f"{title}\n{text}" if title else text


@dataclass(frozen=True)
class StepMatrix:
    """
    差分步的係數矩陣 (N × 2N)：
    x_{t+Δ} = x_t + (x_t − x_{t−Δ}) + matrix @ [x_t ; x_t − x_{t−Δ}]
    """
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if matrix.shape[1] != 2 * matrix.shape[0]:
            raise InvalidArgumentError(f"step matrix must be N x 2N (got {matrix.shape})")
        object.__setattr__(self, 'matrix', _frozen_array(matrix))

    @property
    def size(self):
        return self.matrix.shape[0]
