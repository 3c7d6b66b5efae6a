# oscillatornet/network.py
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .mapping import embed_kernel, make_stencil_bank, mapping_kernel
from .models import CanonicalWeights, ChainSystem, CombinedWeights, MappingParams, ResNetWeights, SolverState
from .solver import step_combined, step_coupled, step_euler_resnet, step_single, step_single_conservative
from .utils.const import (
    COMBINED_NAMES, CONSERVATIVE_NAMES, COUPLED_NAMES, RESNET_NAMES, SINGLE_NAMES, WIDE_KERNEL_SIZE,
)
from .utils.errors import InvalidArgumentError
from .utils.parametrization import combined_projection_terms, projection_terms

# 全部以 float64 計算
DTYPE = torch.float64

NET_NAMES = {
    'single': SINGLE_NAMES,
    'conservative': CONSERVATIVE_NAMES,
    'coupled': COUPLED_NAMES,
    'combined': COMBINED_NAMES,
    'resnet': RESNET_NAMES,
}


def as_tensor(values):
    return torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE)


class ParametrizedNet(nn.Module):
    """
    以具名純量參數組成的網路 (Net whose weights are named scalar parameters).

    frozen 中的參數 requires_grad = False，優化器不會碰到它們。
    """
    def __init__(self, names, values, frozen=()):
        super().__init__()
        self.names = tuple(names)
        missing = [n for n in self.names if n not in values]
        if missing:
            raise InvalidArgumentError(f"missing initial values for {missing}")
        self.params = nn.ParameterDict({
            n: nn.Parameter(torch.tensor(float(values[n]), dtype=DTYPE)) for n in self.names
        })
        for name in frozen:
            if name not in self.params:
                raise InvalidArgumentError(f"cannot freeze unknown parameter {name!r}")
            self.params[name].requires_grad_(False)

    def values(self):
        return {n: float(self.params[n].detach()) for n in self.names}

    def trainable_names(self):
        return tuple(n for n in self.names if self.params[n].requires_grad)

    def loss(self, x):
        # 每個通道的 MSE 相加 (per-channel mean squared error, summed)
        pred, target = self(x)
        return ((pred - target) ** 2).mean(dim=0).sum()


# ==========================================================
# OscillatorNet：完全觀測 (all channels observed)
# ==========================================================

class OscillatorNet(ParametrizedNet):
    """
    二階差分殘差網路 (Second-order finite-difference residual net).

    kind: single | conservative | coupled | combined
    輸入 x 形狀 (T, C)；每對 (x_{t−Δ}, x_t) 預測 x_{t+Δ}。
    """
    history_size = 2

    def __init__(self, kind, values, delta, frozen=()):
        if kind not in ('single', 'conservative', 'coupled', 'combined'):
            raise InvalidArgumentError(f"unknown OscillatorNet kind {kind!r}")
        super().__init__(NET_NAMES[kind], values, frozen)
        self.kind = kind
        self.delta = float(delta)
        self.channels = 1 if kind in ('single', 'conservative') else 2

    def _weights(self, p):
        if self.kind == 'single':
            return CanonicalWeights(p['m'], p['b'], p['k'], checked=False)
        if self.kind == 'conservative':
            return CanonicalWeights(p['m'], 0.0, p['k'], checked=False)
        if self.kind == 'coupled':
            return ChainSystem((
                CanonicalWeights(p['m1'], p['b1'], p['k1'], checked=False),
                CanonicalWeights(p['m2'], p['b2'], p['k2'], checked=False),
            ))
        return CombinedWeights(*(p[n] for n in COMBINED_NAMES), checked=False)

    def record(self):
        return self._weights(self.values())

    def _step(self, x_prev, x_curr):
        w = self._weights(self.params)
        if self.kind == 'single':
            return step_single(w, SolverState(x_prev[..., 0], x_curr[..., 0]), self.delta).unsqueeze(-1)
        if self.kind == 'conservative':
            return step_single_conservative(w, SolverState(x_prev[..., 0], x_curr[..., 0]), self.delta).unsqueeze(-1)
        s = SolverState(x_prev.transpose(0, -1), x_curr.transpose(0, -1))
        if self.kind == 'coupled':
            nxt = step_coupled(w, s, self.delta)
        else:
            nxt = step_combined(w, s)
        return torch.stack(nxt, dim=-1)

    def forward(self, x):
        return self._step(x[:-2], x[1:-1]), x[2:]

    def predict_next(self, history):
        with torch.no_grad():
            h = as_tensor(history)
            return self._step(h[-2], h[-1]).numpy()


class ResNetBaseline(ParametrizedNet):
    """一階 ResNet 區塊 x' = x + Δ·θ·x (first-order baseline)。"""
    history_size = 1
    channels = 1

    def __init__(self, values, delta, frozen=()):
        super().__init__(RESNET_NAMES, values, frozen)
        self.delta = float(delta)

    def record(self):
        return ResNetWeights(self.values()['theta'])

    def forward(self, x):
        return step_euler_resnet(self.params['theta'], x[:-1], self.delta), x[1:]

    def predict_next(self, history):
        with torch.no_grad():
            h = as_tensor(history)
            return step_euler_resnet(self.params['theta'], h[-1], self.delta).numpy()


# ==========================================================
# PartialOscillatorNet：只觀測 x1 (mapping + solver)
# ==========================================================

class PartialOscillatorNet(ParametrizedNet):
    """
    只觀測第一個振子時的網路：先以 mapping 由 x1 重建 x̂2，再由耦合步預測下一個 x1。

    kernel = 1 時映射由求解器權重共享 (α, β, γ 由 V 計算)；
    kernel = 25 時映射是一個獨立可訓練的寬 kernel。
    """

    def __init__(self, parametrization, values, delta, mapping_config, frozen=()):
        if parametrization not in ('canonical', 'combined'):
            raise InvalidArgumentError(f"unknown parametrization {parametrization!r}")
        super().__init__(COUPLED_NAMES if parametrization == 'canonical' else COMBINED_NAMES, values, frozen)
        self.parametrization = parametrization
        self.delta = float(delta)
        self.mapping_config = mapping_config
        self.padding = mapping_config.padding
        self.bank = make_stencil_bank(mapping_config.stencil_order)

        d2 = self.bank.d2.coefficients
        d1 = np.concatenate([[0.0], self.bank.d1.coefficients])
        unit = np.zeros(len(d2))
        unit[-1] = 1.0
        self.register_buffer('d2', as_tensor(d2))
        self.register_buffer('d1', as_tensor(d1))
        self.register_buffer('unit', as_tensor(unit))

        if mapping_config.kernel == WIDE_KERNEL_SIZE:
            shared = mapping_kernel(self._projection_params(), self.bank)
            self.wide_kernel = nn.Parameter(as_tensor(embed_kernel(shared, WIDE_KERNEL_SIZE)))
        else:
            self.wide_kernel = None

    # ----- weights -----

    def _weights(self, p):
        if self.parametrization == 'canonical':
            return ChainSystem((
                CanonicalWeights(p['m1'], p['b1'], p['k1'], checked=False),
                CanonicalWeights(p['m2'], p['b2'], p['k2'], checked=False),
            ))
        return CombinedWeights(*(p[n] for n in COMBINED_NAMES), checked=False)

    def step_weights(self):
        return self._weights(self.values())

    def _projection(self, p):
        if self.parametrization == 'canonical':
            return projection_terms(p['m1'], p['b1'], p['k1'], p['k2'], self.delta)
        return combined_projection_terms(p['param_a'], p['param_c'], p['param_e'])

    def _projection_params(self):
        alpha, beta, gamma = self._projection(self.values())
        return MappingParams(
            alpha=float(alpha), beta=float(beta), gamma=float(gamma),
            padding=self.padding, stencil_accuracy=self.bank.accuracy_order,
        )

    def mapping_params(self):
        if self.wide_kernel is None:
            return self._projection_params()
        return MappingParams(
            wide_kernel=self.wide_kernel.detach().numpy().copy(),
            padding=self.padding, stencil_accuracy=self.bank.accuracy_order,
        )

    def trainable_names(self):
        names = super().trainable_names()
        return names + (('wide_kernel',) if self.wide_kernel is not None else ())

    # ----- mapping -----

    def kernel(self):
        if self.wide_kernel is not None:
            return self.wide_kernel
        alpha, beta, gamma = self._projection(self.params)
        return alpha * self.d2 + beta * self.d1 + gamma * self.unit

    @property
    def offset(self):
        return len(self.kernel()) - 1 if self.padding == 'valid' else 0

    def hidden_tensor(self, x1):
        kernel = self.kernel()
        x = x1.reshape(1, 1, -1)
        if self.padding == 'causal':
            x = F.pad(x, (len(kernel) - 1, 0))
        if x.shape[-1] < len(kernel):
            raise InvalidArgumentError(f"x1 window needs at least {len(kernel)} samples for valid padding")
        return F.conv1d(x, kernel.reshape(1, 1, -1)).reshape(-1)

    def hidden(self, x1):
        with torch.no_grad():
            return self.hidden_tensor(as_tensor(x1)).numpy()

    # ----- solver -----

    def forward(self, x1):
        x1 = x1.reshape(-1)
        n = len(x1)
        offset = self.offset
        # 第一個可用的 x̂2 在 index offset，需要前後兩個 x̂2
        start = offset + 1
        if n - 1 - start < 1:
            raise InvalidArgumentError(f"x1 window of {n} samples leaves no training targets")
        x2 = self.hidden_tensor(x1)
        x1_curr = x1[start:n - 1]
        x1_prev = x1[start - 1:n - 2]
        x2_curr = x2[start - offset:n - 1 - offset]
        x2_prev = x2[start - 1 - offset:n - 2 - offset]
        s = SolverState((x1_prev, x2_prev), (x1_curr, x2_curr))
        w = self._weights(self.params)
        if self.parametrization == 'canonical':
            pred = step_coupled(w, s, self.delta)[0]
        else:
            pred = step_combined(w, s)[0]
        return pred.unsqueeze(-1), x1[start + 1:].unsqueeze(-1)
