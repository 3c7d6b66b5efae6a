# oscillatornet/simulator.py
import logging

import numpy as np

from .models import CanonicalWeights, ChainSystem, Trajectory
from .utils.const import RK4_SUBSTEPS
from .utils.data_validation import require_positive
from .utils.errors import InvalidArgumentError, UnsupportedRegimeError

logger = logging.getLogger(__name__)

MIN_SAMPLES = 3


# ==========================================================
# 積分器 (Classical Runge-Kutta)
# ==========================================================

def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + k1 * h / 2)
    k3 = f(y + k2 * h / 2)
    k4 = f(y + k3 * h)
    return y + (k1 + 2 * k2 + 2 * k3 + k4) * h / 6


def integrate(f, y0, delta, n, substeps=RK4_SUBSTEPS):
    """
    以 RK4 積分自治系統 dy/dt = f(y)，每個 Δ 分成 substeps 個子步，回傳 n 個取樣點。
    (Returns an array of shape (n, len(y0)); row 0 is y0.)
    """
    h = delta / substeps
    y = np.array(y0, dtype=np.float64)
    out = np.empty((n, len(y)), dtype=np.float64)
    out[0] = y
    for i in range(1, n):
        for _ in range(substeps):
            y = rk4_step(f, y, h)
        out[i] = y
    return out


# ==========================================================
# 鏈狀系統矩陣 (Chain matrices)
# ==========================================================

def chain_matrices(chain):
    """
    質量、阻尼、剛度矩陣 (M, B, K)；振子 1 透過 k1 接牆，振子 i 透過 k_i 接振子 i-1。
    """
    n = len(chain)
    m = np.array([o.mass for o in chain.oscillators], dtype=np.float64)
    b = np.array([o.damping for o in chain.oscillators], dtype=np.float64)
    k = np.array([o.spring for o in chain.oscillators], dtype=np.float64)

    stiffness = np.zeros((n, n))
    for i in range(n):
        stiffness[i, i] = k[i] + (k[i + 1] if i + 1 < n else 0.0)
        if i + 1 < n:
            stiffness[i, i + 1] = -k[i + 1]
            stiffness[i + 1, i] = -k[i + 1]
    return np.diag(m), np.diag(b), stiffness


def chain_system_matrix(chain):
    # 一階系統 y = [x, v]：dy/dt = A y
    n = len(chain)
    mass, damping, stiffness = chain_matrices(chain)
    inv_mass = np.diag(1.0 / np.diag(mass))
    a = np.zeros((2 * n, 2 * n))
    a[:n, n:] = np.eye(n)
    a[n:, :n] = -inv_mass @ stiffness
    a[n:, n:] = -inv_mass @ damping
    return a


def _as_chain(chain):
    if isinstance(chain, CanonicalWeights):
        return ChainSystem((chain,))
    if isinstance(chain, ChainSystem):
        return chain
    return ChainSystem(tuple(chain))


def _check_request(n, delta, init, count):
    require_positive('delta', delta)
    if int(n) < MIN_SAMPLES:
        raise InvalidArgumentError(f"need at least {MIN_SAMPLES} samples (got {n})")
    if len(init) != count:
        raise InvalidArgumentError(f"initial state has {len(init)} entries for {count} oscillators")


# ==========================================================
# 模擬 (Simulation)
# ==========================================================

def simulate_chain(chain, init, delta, n, substeps=RK4_SUBSTEPS):
    """
    模擬任意長度的阻尼振子鏈 (Simulate a damped chain of any length).

    Parameters:
    chain: ChainSystem 或 CanonicalWeights 的序列
    init: InitialState (每個振子一個位置與速度)
    delta: 取樣間隔 Δ [s]
    n: 取樣點數 (≥ 3)

    Returns:
    tuple of Trajectory，每個振子一條
    """
    chain = _as_chain(chain)
    states = simulate_states(chain, init, delta, n, substeps)
    return tuple(Trajectory(states[:, i], delta) for i in range(len(chain)))


def simulate_states(chain, init, delta, n, substeps=RK4_SUBSTEPS):
    """完整狀態 [x_1..x_n, v_1..v_n]，形狀 (n_samples, 2·n)。"""
    chain = _as_chain(chain)
    count = len(chain)
    _check_request(n, delta, init, count)

    a = chain_system_matrix(chain)
    y0 = np.concatenate([init.positions, init.velocities])
    states = integrate(lambda y: a @ y, y0, delta, int(n), substeps)
    logger.debug("simulated %d oscillators, %d samples at delta=%g", count, n, delta)
    return states


def simulate_single(w, init, delta, n, substeps=RK4_SUBSTEPS):
    """單一阻尼振子 m ẍ = −b ẋ − k x 的取樣軌跡。"""
    if len(init) != 1:
        raise InvalidArgumentError("a single oscillator needs exactly one initial position")
    return simulate_chain(ChainSystem((w,)), init, delta, n, substeps)[0]


def simulate_coupled(chain, init, delta, n, substeps=RK4_SUBSTEPS):
    """兩個耦合振子 (x1, x2)，拓樸為 牆–k1–m1–k2–m2。"""
    chain = _as_chain(chain)
    if len(chain) != 2:
        raise InvalidArgumentError(f"the coupled system has exactly 2 oscillators (got {len(chain)})")
    return simulate_chain(chain, init, delta, n, substeps)


def analytic_single(w, init, t):
    """
    欠阻尼解析解 (Closed-form underdamped solution):
    x(t) = e^{−σt}(x0 cos ω_d t + (v0 + σx0)/ω_d sin ω_d t), σ = b/2m
    """
    sigma, omega_d = _underdamped(w)
    x0 = init.positions[0]
    v0 = init.velocities[0]
    t = np.asarray(t, dtype=np.float64)
    x = np.exp(-sigma * t) * (x0 * np.cos(omega_d * t) + (v0 + sigma * x0) / omega_d * np.sin(omega_d * t))
    return float(x) if x.ndim == 0 else x


def _underdamped(w):
    if w.damping ** 2 >= 4 * w.mass * w.spring:
        raise UnsupportedRegimeError(
            f"closed form only covers the underdamped regime b^2 < 4mk (b={w.damping}, m={w.mass}, k={w.spring})"
        )
    sigma = w.damping / (2 * w.mass)
    omega_d = np.sqrt(w.spring / w.mass - sigma ** 2)
    return sigma, omega_d


def damped_period(w):
    """阻尼週期 T_d = 2π/ω_d [s]。"""
    _, omega_d = _underdamped(w)
    return float(2 * np.pi / omega_d)


def add_noise(trajectory, std, seed=0):
    """加上高斯雜訊 (additive Gaussian noise, seeded)。std = 0 時原樣回傳。"""
    if std < 0:
        raise InvalidArgumentError(f"noise std must be >= 0 (got {std})")
    if std == 0:
        return trajectory
    rng = np.random.default_rng(seed)
    noisy = trajectory.samples + rng.normal(0.0, std, size=len(trajectory))
    return Trajectory(noisy, trajectory.delta, trajectory.t0)


def chain_energy(chain, positions, velocities):
    """
    動能 + 彈簧位能 (含接牆彈簧)。positions / velocities 形狀為 (n,) 或 (n, T)。
    """
    chain = _as_chain(chain)
    x = np.asarray(positions, dtype=np.float64)
    v = np.asarray(velocities, dtype=np.float64)
    energy = 0.0
    previous = np.zeros_like(x[0])
    for i, o in enumerate(chain.oscillators):
        energy = energy + 0.5 * o.mass * v[i] ** 2 + 0.5 * o.spring * (x[i] - previous) ** 2
        previous = x[i]
    return energy
