# oscillatornet/utils/parametrization.py
import re

from ..models import CanonicalWeights, ChainSystem, CombinedWeights, MappingParams, ResNetWeights
from .const import COMBINED_NAMES, DEFAULT_STENCIL_ORDER, RESNET_NAMES
from .data_validation import is_concrete, require_positive
from .errors import InvalidArgumentError, ZeroSpringError


# ==========================================================
# 正則權重 W ↔ 組合權重 U (Canonical ↔ combined weights)
# ==========================================================

def canonical_to_combined(w1, w2, delta):
    """
    將兩個振子的正則權重轉為組合權重 (Convert canonical weights to combined weights a–e).

    a = Δ²k2/m1, b = Δ²k2/m2, c = Δb1/m1, d = Δb2/m2, e = (k1 + k2)/k2
    """
    require_positive('delta', delta)
    require_positive('m1', w1.mass)
    require_positive('m2', w2.mass)
    d2 = delta * delta
    return CombinedWeights(
        param_a=d2 * w2.spring / w1.mass,
        param_b=d2 * w2.spring / w2.mass,
        param_c=delta * w1.damping / w1.mass,
        param_d=delta * w2.damping / w2.mass,
        param_e=(w1.spring + w2.spring) / w2.spring,
    )


def combined_to_canonical(u, m1, delta):
    """
    組合權重還原成正則權重；整體尺度不可觀測，所以必須給定 m1。
    (Inverse of canonical_to_combined for a chosen first mass.)
    """
    require_positive('m1', m1)
    require_positive('delta', delta)
    d2 = delta * delta
    k2 = u.param_a * m1 / d2
    m2 = d2 * k2 / u.param_b
    return ChainSystem((
        CanonicalWeights(m1, u.param_c * m1 / delta, (u.param_e - 1.0) * k2),
        CanonicalWeights(m2, u.param_d * m2 / delta, k2),
    ))


# ==========================================================
# 投影 (Projection α, β, γ)
# ==========================================================

def projection_terms(m1, b1, k1, k2, delta):
    # 同時支援 float / numpy / torch
    if is_concrete(k2) and k2 == 0:
        raise ZeroSpringError("projection is undefined for a coupling spring k2 = 0")
    alpha = m1 / (k2 * delta * delta)
    beta = b1 / (k2 * delta)
    gamma = (k1 + k2) / k2
    return alpha, beta, gamma


def combined_projection_terms(param_a, param_c, param_e):
    if is_concrete(param_a) and param_a == 0:
        raise ZeroSpringError("projection is undefined for param_a = 0")
    return 1.0 / param_a, param_c / param_a, param_e


def projection_from_canonical(m1, b1, k1, k2, delta, stencil_accuracy=DEFAULT_STENCIL_ORDER, padding='valid'):
    """
    由子集 V = {m1, b1, k1, k2} 建立映射投影 (Projection from the trainable subset V).

    α = m1/(k2Δ²), β = b1/(k2Δ), γ = (k1 + k2)/k2
    """
    require_positive('delta', delta)
    alpha, beta, gamma = projection_terms(m1, b1, k1, k2, delta)
    return MappingParams(
        alpha=float(alpha), beta=float(beta), gamma=float(gamma),
        padding=padding, stencil_accuracy=stencil_accuracy,
    )


def combined_to_projection(u, stencil_accuracy=DEFAULT_STENCIL_ORDER, padding='valid'):
    """同一個投影以組合權重表示：α = 1/a, β = c/a, γ = e。"""
    alpha, beta, gamma = combined_projection_terms(u.param_a, u.param_c, u.param_e)
    return MappingParams(
        alpha=float(alpha), beta=float(beta), gamma=float(gamma),
        padding=padding, stencil_accuracy=stencil_accuracy,
    )


# ==========================================================
# 尺度 (Scale gauge)
# ==========================================================

def rescale_weights(w, reference_mass):
    """
    將所有正則權重乘上 reference_mass / m1 (Fix the unobservable common scale).

    只有比值 b/m、k/m 能從資料中辨識，參考質量決定報表上的絕對尺度。
    """
    require_positive('reference_mass', reference_mass)
    if isinstance(w, CanonicalWeights):
        scale = reference_mass / w.mass
        return CanonicalWeights(w.mass * scale, w.damping * scale, w.spring * scale, checked=w.checked)
    if isinstance(w, ChainSystem):
        scale = reference_mass / w[0].mass
        return ChainSystem(tuple(
            CanonicalWeights(o.mass * scale, o.damping * scale, o.spring * scale, checked=o.checked)
            for o in w.oscillators
        ))
    raise InvalidArgumentError(f"cannot rescale {type(w).__name__}")


# ==========================================================
# 名稱 ↔ 數值 (Ordered name/value views)
# ==========================================================

_INDEXED = re.compile(r'^([mbk])(\d+)$')


def weights_to_dict(w):
    """依報表欄位順序輸出 {name: value}。"""
    if isinstance(w, (CanonicalWeights, ChainSystem, CombinedWeights, ResNetWeights)):
        return {name: float(value) for name, value in w.as_dict().items()}
    raise InvalidArgumentError(f"unknown weights record {type(w).__name__}")


def weights_from_dict(values, checked=True):
    """
    依欄位名稱推斷權重型別 (Infer the record type from the names).

    {m, b, k} / {m, k} → CanonicalWeights；{m1, b1, k1, ...} → ChainSystem；
    {param_a..param_e} → CombinedWeights；{theta} → ResNetWeights
    """
    names = set(values)
    if names == set(COMBINED_NAMES):
        return CombinedWeights(*(float(values[n]) for n in COMBINED_NAMES), checked=checked)
    if names == set(RESNET_NAMES):
        return ResNetWeights(float(values['theta']))
    if names in ({'m', 'b', 'k'}, {'m', 'k'}):
        return CanonicalWeights(float(values['m']), float(values.get('b', 0.0)), float(values['k']), checked=checked)

    indexed = {}
    for name, value in values.items():
        match = _INDEXED.match(name)
        if not match:
            raise InvalidArgumentError(f"unknown parameter name {name!r}")
        indexed.setdefault(int(match.group(2)), {})[match.group(1)] = float(value)
    count = len(indexed)
    if sorted(indexed) != list(range(1, count + 1)) or any(len(v) != 3 for v in indexed.values()):
        raise InvalidArgumentError("chain weights need m_i, b_i and k_i for i = 1..n")
    return ChainSystem(tuple(
        CanonicalWeights(indexed[i]['m'], indexed[i]['b'], indexed[i]['k'], checked=checked)
        for i in range(1, count + 1)
    ))
