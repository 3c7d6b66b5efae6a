# oscillatornet/solver.py
import logging

import numpy as np

from .models import CanonicalWeights, ChainSystem, CombinedWeights, ResNetWeights, RetrainPolicy, SolverState, StepMatrix, Trajectory
from .utils.const import DIVERGENCE_FACTOR
from .utils.data_validation import require_positive
from .utils.errors import DivergedForecastError, InvalidArgumentError

logger = logging.getLogger(__name__)


# ==========================================================
# 差分步 (Finite-difference residual steps)
# 所有 step 函式對 float / numpy / torch 皆適用，不做 I/O、不寫 log
# ==========================================================

def step_single(w, s, delta):
    """
    單一阻尼振子的中央差分步 (Central-difference step of a damped oscillator):
    x_{t+Δ} = (−bΔ/m)(x_t − x_{t−Δ}) − (kΔ²/m) x_t + 2x_t − x_{t−Δ}
    """
    x, xp = s.x_curr, s.x_prev
    return -(w.damping * delta / w.mass) * (x - xp) - (w.spring * delta * delta / w.mass) * x + 2 * x - xp


def step_single_conservative(w, s, delta):
    # 單一濾波器版本：阻尼項不存在 (damping ignored)
    x, xp = s.x_curr, s.x_prev
    return 2 * x - xp - (w.spring * delta * delta / w.mass) * x


def step_coupled(chain, s, delta):
    """
    兩個耦合振子的差分步，依 ODE 系統離散化：
    x1' = (−b1Δ/m1)(x1 − x1p) − (Δ²/m1)(k1 + k2)x1 + (k2Δ²/m1)x2 + 2x1 − x1p
    x2' = (−b2Δ/m2)(x2 − x2p) + (k2Δ²/m2)(x1 − x2) + 2x2 − x2p
    """
    o1, o2 = chain[0], chain[1]
    x1, x2 = s.x_curr[0], s.x_curr[1]
    x1p, x2p = s.x_prev[0], s.x_prev[1]
    d2 = delta * delta
    x1_next = (
        -(o1.damping * delta / o1.mass) * (x1 - x1p)
        - (d2 / o1.mass) * (o1.spring + o2.spring) * x1
        + (o2.spring * d2 / o1.mass) * x2
        + 2 * x1 - x1p
    )
    x2_next = (
        -(o2.damping * delta / o2.mass) * (x2 - x2p)
        + (o2.spring * d2 / o2.mass) * (x1 - x2)
        + 2 * x2 - x2p
    )
    return x1_next, x2_next


def step_combined(u, s):
    """
    同一個耦合步，只用組合權重 a–e (no explicit Δ):
    x1' = −c(x1 − x1p) − a·e·x1 + a·x2 + 2x1 − x1p
    x2' = −d(x2 − x2p) + b(x1 − x2) + 2x2 − x2p
    """
    x1, x2 = s.x_curr[0], s.x_curr[1]
    x1p, x2p = s.x_prev[0], s.x_prev[1]
    x1_next = -u.param_c * (x1 - x1p) - u.param_a * u.param_e * x1 + u.param_a * x2 + 2 * x1 - x1p
    x2_next = -u.param_d * (x2 - x2p) + u.param_b * (x1 - x2) + 2 * x2 - x2p
    return x1_next, x2_next


def step_euler_resnet(theta, s, d):
    """一階 ResNet / forward Euler 基準：x_{l+1} = x_l + d·θ·x_l。"""
    require_positive('d', d)
    x = s.x_curr if isinstance(s, SolverState) else s
    return x + d * theta * x


# ==========================================================
# 係數矩陣 (Step matrix)
# ==========================================================

def step_matrix(weights, delta=None):
    """
    將權重寫成 N × 2N 矩陣，作用在 [x_t ; x_t − x_{t−Δ}] 上得到更新增量。
    """
    if isinstance(weights, CanonicalWeights):
        require_positive('delta', delta)
        return StepMatrix([[-weights.spring * delta ** 2 / weights.mass, -weights.damping * delta / weights.mass]])
    if isinstance(weights, ChainSystem):
        if len(weights) != 2:
            raise InvalidArgumentError("step matrices are defined for one or two oscillators")
        require_positive('delta', delta)
        o1, o2 = weights[0], weights[1]
        d2 = delta ** 2
        return StepMatrix([
            [-d2 * (o1.spring + o2.spring) / o1.mass, d2 * o2.spring / o1.mass, -o1.damping * delta / o1.mass, 0.0],
            [d2 * o2.spring / o2.mass, -d2 * o2.spring / o2.mass, 0.0, -o2.damping * delta / o2.mass],
        ])
    if isinstance(weights, CombinedWeights):
        u = weights
        return StepMatrix([
            [-u.param_a * u.param_e, u.param_a, -u.param_c, 0.0],
            [u.param_b, -u.param_b, 0.0, -u.param_d],
        ])
    raise InvalidArgumentError(f"no step matrix for {type(weights).__name__}")


def apply_step_matrix(sm, s):
    x = np.atleast_1d(np.asarray(s.x_curr, dtype=np.float64))
    xp = np.atleast_1d(np.asarray(s.x_prev, dtype=np.float64))
    velocity = x - xp
    return x + velocity + sm.matrix @ np.concatenate([x, velocity])


# ==========================================================
# 離散能量 (Discrete Störmer–Verlet energy)
# ==========================================================

def discrete_energy(w, s, delta):
    """E_d = ½m((x_t − x_{t−Δ})/Δ)² + ½k·x_t·x_{t−Δ}，在保守步之下為守恆量。"""
    x, xp = s.x_curr, s.x_prev
    return 0.5 * w.mass * ((x - xp) / delta) ** 2 + 0.5 * w.spring * x * xp


def verlet_amplitude(w, s, delta):
    """
    由守恆的離散能量推得的振幅 (Amplitude implied by the conserved discrete energy).

    以 K = kΔ²/m、2cosθ = 2 − K：A = sqrt(x_t² + x_{t−Δ}² − (2 − K)x_t x_{t−Δ}) / sinθ
    """
    stiffness = w.spring * delta * delta / w.mass
    if not 0 < stiffness < 4:
        raise InvalidArgumentError(f"Verlet map is not oscillatory for kΔ²/m = {stiffness}")
    x = np.asarray(s.x_curr, dtype=np.float64)
    xp = np.asarray(s.x_prev, dtype=np.float64)
    q = x ** 2 + xp ** 2 - (2 - stiffness) * x * xp
    sin_theta = np.sqrt(1 - (1 - stiffness / 2) ** 2)
    return np.sqrt(np.maximum(q, 0.0)) / sin_theta


# ==========================================================
# 自由預測 (Free forecast)
# ==========================================================

class StepModel:
    """
    以固定權重包裝純 step 函式，提供與訓練後網路相同的 predict_next 介面。
    (Wraps a pure step with fixed weights so it can be free-forecast like a trained net.)
    """

    def __init__(self, weights, delta=None, conservative=False):
        self.weights = weights
        self.delta = delta
        self.conservative = conservative
        if isinstance(weights, ResNetWeights):
            self.history_size, self.channels = 1, 1
        elif isinstance(weights, CanonicalWeights):
            self.history_size, self.channels = 2, 1
        elif isinstance(weights, (ChainSystem, CombinedWeights)):
            self.history_size, self.channels = 2, 2
        else:
            raise InvalidArgumentError(f"cannot build a step model from {type(weights).__name__}")

    def predict_next(self, history):
        history = np.asarray(history, dtype=np.float64)
        w = self.weights
        if isinstance(w, ResNetWeights):
            return np.atleast_1d(step_euler_resnet(w.theta, history[-1], self.delta))
        s = SolverState(history[-2], history[-1])
        if isinstance(w, CanonicalWeights):
            step = step_single_conservative if self.conservative else step_single
            return np.atleast_1d(step(w, SolverState(s.x_prev[0], s.x_curr[0]), self.delta))
        if isinstance(w, ChainSystem):
            return np.array(step_coupled(w, s, self.delta))
        return np.array(step_combined(w, s))


def _as_channels(seed_window):
    if isinstance(seed_window, Trajectory):
        return (seed_window,), True
    return tuple(seed_window), False


def free_forecast(model, seed_window, horizon, retrain=None, trainer=None,
                  divergence_factor=DIVERGENCE_FACTOR, reference_amplitude=None):
    """
    自由預測：每個輸出都回饋成下一步的輸入，不再使用新的真值。
    (Free-running forecast; each prediction is fed back as the next step's input.)

    Parameters:
    model: 具有 history_size 與 predict_next(history) 的模型
    seed_window: Trajectory 或每個通道一條 Trajectory 的序列
    horizon: 預測點數
    retrain: RetrainPolicy；per_step 時每預測一點就在真值訓練窗上再訓練 R 次
    trainer: per_step 需要的訓練器 (擁有 model 並保存訓練窗)

    Returns:
    與 seed_window 相同形態的 Trajectory，從 seed 最後一點的下一個 Δ 開始
    """
    retrain = retrain or RetrainPolicy()
    channels, single = _as_channels(seed_window)
    if len(channels) != model.channels:
        raise InvalidArgumentError(f"model forecasts {model.channels} channels, seed has {len(channels)}")
    if horizon < 0:
        raise InvalidArgumentError("horizon must be >= 0")
    seed_len = min(len(c) for c in channels)
    if seed_len < max(2, model.history_size):
        raise InvalidArgumentError(f"seed window needs at least {max(2, model.history_size)} points")
    if retrain.policy == 'per_step' and trainer is None:
        raise InvalidArgumentError("per_step retraining needs the model's trainer")

    delta = channels[0].delta
    t_start = channels[0].t_end + delta
    amplitude = reference_amplitude if reference_amplitude is not None else max(c.amplitude() for c in channels)
    limit = divergence_factor * max(amplitude, np.finfo(float).tiny)

    history = np.stack([c.samples[-model.history_size:] for c in channels], axis=1)
    out = np.empty((horizon, len(channels)))
    for i in range(horizon):
        nxt = np.asarray(model.predict_next(history), dtype=np.float64)
        worst = float(np.max(np.abs(nxt)))
        if not np.isfinite(worst) or worst > limit:
            raise DivergedForecastError(i, worst, limit)
        out[i] = nxt
        history = np.vstack([history[1:], nxt[None, :]])
        if retrain.policy == 'per_step' and i + 1 < horizon:
            trainer.train(retrain.iterations)

    logger.info("free forecast: %d points (retrain=%s)", horizon, retrain.policy)
    result = tuple(Trajectory(out[:, j], delta, t_start) for j in range(len(channels)))
    return result[0] if single else result
