# oscillatornet/training.py
import logging
import math

import numpy as np
import torch
from tqdm import tqdm

from .models import CanonicalWeights, ChainSystem, CombinedWeights, FitConfig, FitReport, MappingConfig, ResNetWeights, Trajectory
from .mapping import mapping_kernel
from .network import OscillatorNet, PartialOscillatorNet, ResNetBaseline, as_tensor
from .utils.const import COLLAPSE_RATIO, NON_NEGATIVE_NAMES, PARTIAL_TRAINABLE, POSITIVE_NAMES
from .utils.data_validation import invalid_parameters, relative_errors, require_length, scale_free_errors
from .utils.errors import DivergedTrainingError, InvalidArgumentError
from .utils.parametrization import canonical_to_combined, rescale_weights, weights_from_dict, weights_to_dict

logger = logging.getLogger(__name__)


# ==========================================================
# 資料整理 (Observed data → arrays)
# ==========================================================

def _channels(observed):
    if isinstance(observed, Trajectory):
        observed = (observed,)
    observed = tuple(observed)
    if not observed:
        raise InvalidArgumentError("no observed trajectories")
    delta = observed[0].delta
    n = len(observed[0])
    for tr in observed:
        if len(tr) != n or not math.isclose(tr.delta, delta):
            raise InvalidArgumentError("observed channels must share length and sampling step")
    require_length('observed', observed[0].samples, 3)
    return np.stack([tr.samples for tr in observed], axis=1), delta


def _kind(weights, conservative=False):
    if isinstance(weights, CanonicalWeights):
        return 'conservative' if conservative else 'single'
    if isinstance(weights, ChainSystem):
        if len(weights) != 2:
            raise InvalidArgumentError("fits are defined for one or two oscillators")
        return 'coupled'
    if isinstance(weights, CombinedWeights):
        return 'combined'
    if isinstance(weights, ResNetWeights):
        return 'resnet'
    raise InvalidArgumentError(f"unknown weights record {type(weights).__name__}")


# ==========================================================
# 損失與解析梯度 (One-step loss, closed-form gradient)
# ==========================================================

def _residuals_and_partials(weights, x, delta, conservative=False):
    """
    回傳每個通道的殘差 r_c (預測 − 觀測) 以及 {name: [∂pred_c/∂name, ...]}。
    差分步對參數是仿射的 (given the state)，所以偏導數都有閉式解。
    """
    kind = _kind(weights, conservative)
    if kind == 'resnet':
        xc, target = x[:-1, 0], x[1:, 0]
        pred = xc + delta * weights.theta * xc
        return [pred - target], {'theta': [delta * xc]}

    xp, xc, target = x[:-2], x[1:-1], x[2:]
    v = xc - xp
    d2 = delta * delta

    if kind in ('single', 'conservative'):
        w = weights
        x0, v0 = xc[:, 0], v[:, 0]
        b = 0.0 if kind == 'conservative' else w.damping
        pred = -(b * delta / w.mass) * v0 - (w.spring * d2 / w.mass) * x0 + 2 * x0 - xp[:, 0]
        partials = {
            'm': [(b * delta * v0 + w.spring * d2 * x0) / w.mass ** 2],
            'b': [-delta * v0 / w.mass],
            'k': [-d2 * x0 / w.mass],
        }
        if kind == 'conservative':
            partials.pop('b')
        return [pred - target[:, 0]], partials

    x1, x2 = xc[:, 0], xc[:, 1]
    v1, v2 = v[:, 0], v[:, 1]
    zero = np.zeros_like(x1)

    if kind == 'coupled':
        o1, o2 = weights[0], weights[1]
        pred1 = -(o1.damping * delta / o1.mass) * v1 - (d2 / o1.mass) * (o1.spring + o2.spring) * x1 \
            + (o2.spring * d2 / o1.mass) * x2 + 2 * x1 - xp[:, 0]
        pred2 = -(o2.damping * delta / o2.mass) * v2 + (o2.spring * d2 / o2.mass) * (x1 - x2) + 2 * x2 - xp[:, 1]
        partials = {
            'm1': [(o1.damping * delta * v1 + d2 * (o1.spring + o2.spring) * x1 - o2.spring * d2 * x2) / o1.mass ** 2, zero],
            'm2': [zero, (o2.damping * delta * v2 - o2.spring * d2 * (x1 - x2)) / o2.mass ** 2],
            'b1': [-delta * v1 / o1.mass, zero],
            'b2': [zero, -delta * v2 / o2.mass],
            'k1': [-d2 * x1 / o1.mass, zero],
            'k2': [d2 * (x2 - x1) / o1.mass, d2 * (x1 - x2) / o2.mass],
        }
    else:
        u = weights
        pred1 = -u.param_c * v1 - u.param_a * u.param_e * x1 + u.param_a * x2 + 2 * x1 - xp[:, 0]
        pred2 = -u.param_d * v2 + u.param_b * (x1 - x2) + 2 * x2 - xp[:, 1]
        partials = {
            'param_a': [x2 - u.param_e * x1, zero],
            'param_b': [zero, x1 - x2],
            'param_c': [-v1, zero],
            'param_d': [zero, -v2],
            'param_e': [-u.param_a * x1, zero],
        }
    return [pred1 - target[:, 0], pred2 - target[:, 1]], partials


def one_step_loss(weights, observed, conservative=False):
    """
    單步預測的 MSE，各通道相加 (One-step-ahead mean squared error, summed over channels).

    observed: Trajectory (單一振子) 或 (x1, x2)
    """
    x, delta = _channels(observed)
    residuals, _ = _residuals_and_partials(weights, x, delta, conservative)
    return float(sum(np.mean(r ** 2) for r in residuals))


def gradient(weights, observed, conservative=False):
    """one_step_loss 對每個參數的精確偏導數 (closed form)。"""
    x, delta = _channels(observed)
    residuals, partials = _residuals_and_partials(weights, x, delta, conservative)
    return {
        name: float(sum(2 * np.mean(r * dp) for r, dp in zip(residuals, dps)))
        for name, dps in partials.items()
    }


# ==========================================================
# 訓練器 (Trainer)
# ==========================================================

def cosine_floor(max_iterations, floor):
    """餘弦衰減到 floor，超過 max_iterations 後固定在 floor。"""
    def factor(it):
        progress = min(it, max_iterations) / max_iterations
        return floor + (1 - floor) * 0.5 * (1 + math.cos(math.pi * progress))
    return factor


class OscillatorTrainer:
    """
    持有模型、訓練資料、優化器與排程器 (Persistent trainer).

    自由預測時的 per_step 重新訓練沿用同一個優化器狀態，學習率固定在下限。
    """

    def __init__(self, model, data, config):
        self.model = model
        self.data = data
        self.config = config
        params = [p for p in model.parameters() if p.requires_grad]
        if not params:
            raise InvalidArgumentError("model has no trainable parameters")
        if config.optimizer == 'plain_gd':
            self.optimizer = torch.optim.SGD(params, lr=config.learning_rate)
        else:
            self.optimizer = torch.optim.Adam(params, lr=config.learning_rate)
        self.scheduler = torch.optim.lr_scheduler.LambdaLR(
            self.optimizer, cosine_floor(config.max_iterations, config.lr_floor)
        )
        self.loss_history = []
        self.iterations = 0
        self.converged = False

    def _step(self):
        self.optimizer.zero_grad()
        loss = self.model.loss(self.data)
        value = float(loss.detach())
        if not math.isfinite(value):
            raise DivergedTrainingError(self.iterations, value)
        loss.backward()
        self.optimizer.step()
        self.iterations += 1
        self.loss_history.append(value)
        return value

    def run(self):
        """
        訓練到 |Δloss| < tolerance 連續 patience 次，或達到 max_iterations。
        """
        cfg = self.config
        quiet = 0
        previous = None
        loop = tqdm(range(cfg.max_iterations), desc='fit', disable=not cfg.progress, leave=False)
        for _ in loop:
            value = self._step()
            self.scheduler.step()
            if previous is not None and abs(previous - value) < cfg.tolerance:
                quiet += 1
                if quiet >= cfg.patience:
                    self.converged = True
                    break
            else:
                quiet = 0
            previous = value
            if cfg.progress and self.iterations % 100 == 0:
                loop.set_postfix(loss=f"{value:.3e}")
        # 最終權重上的 loss
        with torch.no_grad():
            final = float(self.model.loss(self.data))
        self.loss_history.append(final)
        logger.info("fit finished after %d iterations (loss=%.3e, converged=%s)", self.iterations, final, self.converged)
        return self

    def train(self, iterations):
        """在原訓練窗上再訓練 iterations 次，學習率固定為 learning_rate · lr_floor。"""
        floor = self.config.learning_rate * self.config.lr_floor
        for group in self.optimizer.param_groups:
            group['lr'] = floor
        for _ in range(iterations):
            self._step()
        return self


# ==========================================================
# fit / fit_partial
# ==========================================================

def _first_mass(names):
    return 'm' if 'm' in names else ('m1' if 'm1' in names else None)


def _report_weights(values, model_kind, reference_mass):
    """依參考質量固定尺度 (gauge)，回傳報表用的 dict。"""
    if reference_mass is None or model_kind not in ('single', 'conservative', 'coupled'):
        return dict(values)
    if model_kind == 'conservative':
        scale = reference_mass / values['m']
        return {name: value * scale for name, value in values.items()}
    return weights_to_dict(rescale_weights(weights_from_dict(values, checked=False), reference_mass))


def _check_learned(learned):
    invalid = invalid_parameters(learned, POSITIVE_NAMES, NON_NEGATIVE_NAMES)
    if invalid:
        logger.warning("learned weights violate m, k > 0 / b >= 0: %s", invalid)
    return invalid


def _collapsed(learned, init, trainable):
    # 可訓練參數縮到初始值的 COLLAPSE_RATIO 以下 (例如 param_a → 0 讓 α = 1/a 爆掉)
    collapsed = {
        name: learned[name] for name in trainable
        if name in init and abs(learned[name]) < COLLAPSE_RATIO * abs(init[name])
    }
    if collapsed:
        logger.warning("parameters collapsed towards zero: %s", collapsed)
    return collapsed


def build_model(init_weights, delta, config):
    """依 FitConfig 建立完全觀測的網路 (OscillatorNet 或 ResNetBaseline)。"""
    frozen = set(config.frozen)
    if config.model == 'resnet':
        theta = init_weights.theta if isinstance(init_weights, ResNetWeights) else 0.0
        return ResNetBaseline({'theta': theta}, delta, frozen=tuple(frozen))

    if config.parametrization == 'combined':
        if isinstance(init_weights, ChainSystem):
            init_weights = canonical_to_combined(init_weights[0], init_weights[1], delta)
        if not isinstance(init_weights, CombinedWeights):
            raise InvalidArgumentError("combined parametrization needs a two-oscillator system")
    kind = _kind(init_weights, conservative=config.model == 'conservative')
    values = weights_to_dict(init_weights)
    if kind == 'conservative':
        values.pop('b')
    if config.reference_mass is not None and kind in ('single', 'conservative', 'coupled'):
        frozen.add(_first_mass(values))
    return OscillatorNet(kind, values, delta, frozen=tuple(n for n in values if n in frozen))


def fit(init_weights, observed, config=None, truth=None):
    """
    以梯度下降學習 ODE 係數 (Fit the coefficients to fully observed trajectories).

    Parameters:
    init_weights: CanonicalWeights / ChainSystem / CombinedWeights / ResNetWeights
    observed: Trajectory 或 (x1, x2)
    config: FitConfig
    truth: 可選，真值權重 (只用來計算相對誤差)

    Returns:
    FitReport (report.trainer 可供自由預測時再訓練)
    """
    config = config or FitConfig()
    x, delta = _channels(observed)
    torch.manual_seed(config.seed)

    model = build_model(init_weights, delta, config)
    if model.channels != x.shape[1]:
        raise InvalidArgumentError(f"model expects {model.channels} channels, got {x.shape[1]}")
    init_values = model.values()
    trainer = OscillatorTrainer(model, as_tensor(x), config).run()

    kind = getattr(model, 'kind', 'resnet')
    learned = _report_weights(model.values(), kind, config.reference_mass)
    truth_values = _truth_values(truth, learned, delta)
    extras = {'model': config.model, 'reference_mass': config.reference_mass}
    anchor = _first_mass(learned)
    if truth_values and anchor:
        extras['scale_free_rel_error'] = scale_free_errors(learned, truth_values, anchor)
    return FitReport(
        learned=learned,
        init=init_values,
        truth=truth_values,
        rel_error=relative_errors(learned, truth_values) if truth_values else {},
        loss_history=trainer.loss_history,
        parametrization=config.parametrization,
        trainable=model.trainable_names(),
        iterations=trainer.iterations,
        converged=trainer.converged,
        invalid=_check_learned(learned),
        extras=extras,
        trainer=trainer,
    )


def _truth_values(truth, learned, delta):
    if truth is None:
        return None
    if isinstance(truth, ChainSystem) and 'param_a' in learned:
        truth = canonical_to_combined(truth[0], truth[1], delta)
    values = weights_to_dict(truth)
    return {name: values[name] for name in learned if name in values}


def partial_init_values(init_weights, parametrization, delta, mapping_config, truth=None):
    """
    部分觀測的初始值。hidden_init = 'truth' 時隱藏振子的 m2、b2 取自真實系統。
    """
    if isinstance(init_weights, CombinedWeights):
        if parametrization != 'combined':
            raise InvalidArgumentError("combined initial weights need the combined parametrization")
        return weights_to_dict(init_weights)
    if not isinstance(init_weights, ChainSystem) or len(init_weights) != 2:
        raise InvalidArgumentError("partial fits need a two-oscillator initial system")
    chain = init_weights
    if mapping_config.hidden_init == 'truth':
        if truth is None:
            raise InvalidArgumentError("hidden_init='truth' needs the true system")
        hidden = truth[1]
        chain = ChainSystem((chain[0], CanonicalWeights(hidden.mass, hidden.damping, chain[1].spring)))
    if parametrization == 'combined':
        return weights_to_dict(canonical_to_combined(chain[0], chain[1], delta))
    return weights_to_dict(chain)


def fit_partial(init_weights, observed_x1, mapping_config=None, config=None, truth=None):
    """
    只觀測 x1 時同時訓練 mapping 與求解器 (Fit from the first oscillator alone).

    只有子集 V (canonical: m1, b1, k1, k2；combined: a, c, e) 與寬 kernel 會被更新，
    其餘參數保持初始值。
    """
    mapping_config = mapping_config or MappingConfig()
    config = config or FitConfig(parametrization='combined')
    if not isinstance(observed_x1, Trajectory):
        raise InvalidArgumentError("fit_partial observes a single trajectory")
    require_length('observed_x1', observed_x1.samples, 3)
    delta = observed_x1.delta
    torch.manual_seed(config.seed)

    parametrization = config.parametrization
    init_values = partial_init_values(init_weights, parametrization, delta, mapping_config, truth)
    trainable = set(PARTIAL_TRAINABLE[parametrization]) - set(config.frozen)
    frozen = tuple(n for n in init_values if n not in trainable)
    model = PartialOscillatorNet(parametrization, init_values, delta, mapping_config, frozen=frozen)
    init_mapping = model.mapping_params()
    trainer = OscillatorTrainer(model, as_tensor(observed_x1.samples), config).run()

    learned = model.values()
    truth_values = _truth_values(truth, learned, delta)
    mapping = model.mapping_params()
    extras = {
        'mapping': {
            'kernel': mapping_config.kernel,
            'padding': mapping_config.padding,
            'stencil_order': mapping_config.stencil_order,
            'hidden_init': mapping_config.hidden_init,
        },
        'init_mapping_kernel': _kernel_list(init_mapping, model),
        'mapping_kernel': _kernel_list(mapping, model),
    }
    if mapping.is_projection:
        extras['mapping'].update({'alpha': mapping.alpha, 'beta': mapping.beta, 'gamma': mapping.gamma})
    extras['collapsed'] = _collapsed(learned, init_values, model.trainable_names())
    return FitReport(
        learned=learned,
        init=init_values,
        truth=truth_values,
        rel_error=relative_errors(learned, truth_values) if truth_values else {},
        invalid=_check_learned(learned),
        loss_history=trainer.loss_history,
        parametrization=parametrization,
        trainable=model.trainable_names(),
        iterations=trainer.iterations,
        converged=trainer.converged,
        extras=extras,
        trainer=trainer,
    )


def _kernel_list(params, model):
    return [float(v) for v in mapping_kernel(params, model.bank)]
