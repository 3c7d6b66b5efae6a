# oscillatornet/mapping.py
import logging
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .models import CombinedWeights, MappingParams, RetrainPolicy, SolverState, Stencil, StencilBank, Trajectory
from .solver import step_combined, step_coupled
from .utils.const import DIVERGENCE_FACTOR, MAX_STENCIL_ACCURACY
from .utils.errors import DivergedForecastError, InvalidArgumentError, ZeroSpringError

logger = logging.getLogger(__name__)


# ==========================================================
# 向後差分 stencil (Backward finite-difference stencils)
# ==========================================================

@lru_cache(maxsize=None)
def _fornberg_weights(derivative_order, points):
    """
    Fornberg 遞迴：在格點 a = [0, −1, −2, ...] 上、於 x0 = 0 的導數權重，以有理數精確計算。
    回傳 tuple，順序與 a 相同 (目前時間在前)。
    """
    a = [Fraction(-i) for i in range(points)]
    x0 = Fraction(0)
    n_max = points - 1
    sigma = [[[Fraction(0)] * points for _ in range(points)] for _ in range(derivative_order + 1)]
    sigma[0][0][0] = Fraction(1)
    c1 = Fraction(1)
    for n in range(1, n_max + 1):
        c2 = Fraction(1)
        for v in range(n):
            c3 = a[n] - a[v]
            c2 *= c3
            for m in range(min(n, derivative_order) + 1):
                lower = m * sigma[m - 1][n - 1][v] if m else 0
                sigma[m][n][v] = ((a[n] - x0) * sigma[m][n - 1][v] - lower) / c3
        for m in range(min(n, derivative_order) + 1):
            lower = m * sigma[m - 1][n - 1][n - 1] if m else 0
            sigma[m][n][n] = (c1 / c2) * (lower - (a[n - 1] - x0) * sigma[m][n - 1][n - 1])
        c1 = c2
    return tuple(sigma[derivative_order][n_max])


def make_backward_stencil(derivative_order, accuracy_order):
    """
    建立向後差分 stencil (Backward stencil of the given accuracy).

    長度為 derivative_order + accuracy_order；index 0 為最舊的格點、最後一個為目前時間 t。
    係數未除以 Δ^derivative_order。
    """
    if derivative_order not in (1, 2):
        raise InvalidArgumentError(f"derivative order must be 1 or 2 (got {derivative_order})")
    if not 1 <= int(accuracy_order) <= MAX_STENCIL_ACCURACY:
        raise InvalidArgumentError(f"accuracy order must lie in [1, {MAX_STENCIL_ACCURACY}] (got {accuracy_order})")
    weights = _fornberg_weights(derivative_order, derivative_order + int(accuracy_order))
    coefficients = [float(w) for w in reversed(weights)]
    return Stencil(derivative_order, int(accuracy_order), coefficients)


def exact_backward_stencil(derivative_order, accuracy_order):
    # 有理數版本 (for exact comparisons against tabulated stencils)
    make_backward_stencil(derivative_order, accuracy_order)
    return list(reversed(_fornberg_weights(derivative_order, derivative_order + int(accuracy_order))))


def make_stencil_bank(accuracy_order):
    return StencilBank(
        d1=make_backward_stencil(1, accuracy_order),
        d2=make_backward_stencil(2, accuracy_order),
        accuracy_order=int(accuracy_order),
    )


# ==========================================================
# 卷積 (Stencil convolution)
# ==========================================================

def convolve(samples, kernel, padding):
    """
    y[t] = Σ_j kernel[j]·x[t − (L−1) + j]

    valid → 長度 N − (L−1)，第一個輸出對應 index L−1
    causal → 左側補 L−1 個 0，長度與輸入相同
    """
    x = np.asarray(samples, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    size = len(kernel)
    if padding == 'causal':
        x = np.concatenate([np.zeros(size - 1), x])
    elif padding != 'valid':
        raise InvalidArgumentError(f"unknown padding {padding!r}")
    if len(x) < size:
        raise InvalidArgumentError(f"valid padding needs at least {size} samples (got {len(x)})")
    return np.correlate(x, kernel, mode='valid')


def _offset(size, padding):
    return size - 1 if padding == 'valid' else 0


def apply_stencil(x, s, padding='valid'):
    """將 stencil 作用在軌跡上；輸出時間軸與輸入對齊。"""
    coefficients = s.coefficients if isinstance(s, Stencil) else np.asarray(s, dtype=np.float64)
    out = convolve(x.samples, coefficients, padding)
    return Trajectory(out, x.delta, x.t0 + _offset(len(coefficients), padding) * x.delta)


def mapping_kernel(params, bank=None):
    """
    與 α·D2 + β·D1 + γ·x1 等價的單一 kernel (右側對齊，長度同 d2)；
    寬 kernel 模式直接回傳該 kernel。
    """
    if not params.is_projection:
        return np.array(params.wide_kernel)
    bank = bank or make_stencil_bank(params.stencil_accuracy)
    if bank.accuracy_order != params.stencil_accuracy:
        raise InvalidArgumentError(
            f"stencil bank order {bank.accuracy_order} does not match mapping order {params.stencil_accuracy}"
        )
    d2 = bank.d2.coefficients
    kernel = params.alpha * d2
    kernel[1:] += params.beta * bank.d1.coefficients
    kernel[-1] += params.gamma
    return kernel


def embed_kernel(kernel, size):
    """將短 kernel 右側對齊放進長度 size 的零向量 (initial wide kernel)。"""
    kernel = np.asarray(kernel, dtype=np.float64)
    if len(kernel) > size:
        raise InvalidArgumentError(f"kernel of length {len(kernel)} does not fit in {size} taps")
    wide = np.zeros(size)
    wide[size - len(kernel):] = kernel
    return wide


def map_to_hidden(x1, p, bank=None):
    """
    由觀測到的 x1 重建隱藏振子 x̂2：x̂2 = α·D2(x1) + β·D1(x1) + γ·x1，
    或寬 kernel 模式下 x1 與自由 kernel 的卷積。
    """
    kernel = mapping_kernel(p, bank)
    out = convolve(x1.samples, kernel, p.padding)
    return Trajectory(out, x1.delta, x1.t0 + _offset(len(kernel), p.padding) * x1.delta)


def _aligned(traj, t0, n):
    start = int(round((t0 - traj.t0) / traj.delta))
    if start < 0 or start + n > len(traj):
        raise InvalidArgumentError("predecessor trajectories do not cover the reconstructed window")
    return traj.samples[start:start + n]


def recover_xi(prefix, chain, bank, padding='valid'):
    """
    由振子 1..i−1 的軌跡重建第 i 個振子 (Reconstruct oscillator i from its predecessors).

    依振子 i−1 的運動方程式：
    x_i = x_{i−1} + [m_{i−1}ẍ_{i−1} + b_{i−1}ẋ_{i−1} + k_{i−1}(x_{i−1} − x_{i−2})] / k_i，x_0 ≡ 0 (牆)
    """
    prefix = [prefix] if isinstance(prefix, Trajectory) else list(prefix)
    i = len(prefix) + 1
    if i < 2:
        raise InvalidArgumentError("recovering oscillator i needs the trajectory of oscillator i-1")
    if len(chain) < i:
        raise InvalidArgumentError(f"need weights for {i} oscillators (chain has {len(chain)})")
    prev, this = chain[i - 2], chain[i - 1]
    last = prefix[-1]
    delta = last.delta

    if this.spring == 0:
        raise ZeroSpringError(f"cannot recover oscillator {i} through a zero spring")
    params = MappingParams(
        alpha=prev.mass / (this.spring * delta ** 2),
        beta=prev.damping / (this.spring * delta),
        gamma=(prev.spring + this.spring) / this.spring,
        padding=padding,
        stencil_accuracy=bank.accuracy_order,
    )
    mapped = map_to_hidden(last, params, bank)
    if i > 2:
        before = _aligned(prefix[-2], mapped.t0, len(mapped))
        mapped = Trajectory(mapped.samples - (prev.spring / this.spring) * before, delta, mapped.t0)
    return mapped


def intersections(x1, x2):
    """x1 − x2 變號的 sample index (第一個與前一點異號的位置)。"""
    a = x1.samples if isinstance(x1, Trajectory) else np.asarray(x1, dtype=np.float64)
    b = x2.samples if isinstance(x2, Trajectory) else np.asarray(x2, dtype=np.float64)
    diff = a - b
    sign = np.sign(diff)
    return np.nonzero(sign[1:] * sign[:-1] < 0)[0] + 1


# ==========================================================
# 部分觀測的自由預測 (Forecast from x1 only)
# ==========================================================

def _coupled_step(weights, x_prev, x_curr, delta):
    s = SolverState(x_prev, x_curr)
    if isinstance(weights, CombinedWeights):
        return step_combined(weights, s)
    return step_coupled(weights, s, delta)


def forecast_partial(model, x1_window, horizon, ifl=False, retrain=None, trainer=None,
                     divergence_factor=DIVERGENCE_FACTOR):
    """
    只觀測 x1 時的自由預測 (Free forecast of the observed oscillator).

    ifl=False: x̂2 固定在訓練窗最後一個映射值，只推進 x1。
    ifl=True (inner feedback loop): 每一步之前都由目前的 x1 視窗 (含已預測的點) 重新映射 x̂2。
    retrain 與 free_forecast 相同：per_step 時每一點之後在真值訓練窗上再訓練。
    """
    if horizon < 0:
        raise InvalidArgumentError("horizon must be >= 0")
    retrain = retrain or RetrainPolicy()
    if retrain.policy == 'per_step' and trainer is None:
        raise InvalidArgumentError("per_step retraining needs the model's trainer")
    delta = x1_window.delta
    weights = model.step_weights()
    history = list(x1_window.samples)
    limit = divergence_factor * max(x1_window.amplitude(), np.finfo(float).tiny)

    hidden = model.hidden(np.asarray(history))
    if len(hidden) < 2:
        raise InvalidArgumentError("x1 window too short to seed the hidden channel")
    x2_prev, x2_curr = hidden[-2], hidden[-1]

    out = np.empty(horizon)
    for i in range(horizon):
        if ifl and i > 0:
            hidden = model.hidden(np.asarray(history))
            x2_prev, x2_curr = hidden[-2], hidden[-1]
        x_prev = (history[-2], x2_prev)
        x_curr = (history[-1], x2_curr)
        x1_next, _ = _coupled_step(weights, x_prev, x_curr, delta)
        if not np.isfinite(x1_next) or abs(x1_next) > limit:
            raise DivergedForecastError(i, float(x1_next), limit)
        out[i] = x1_next
        history.append(float(x1_next))
        if retrain.policy == 'per_step' and i + 1 < horizon:
            trainer.train(retrain.iterations)
            weights = model.step_weights()

    logger.info("partial forecast: %d points (ifl=%s)", horizon, ifl)
    return Trajectory(out, delta, x1_window.t_end + delta)
