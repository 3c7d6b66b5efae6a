import numbers

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError


def is_concrete(val):
    """只驗證具體數值；訓練中的 torch tensor 直接放行。"""
    return isinstance(val, numbers.Real) and not isinstance(val, bool)


def require_positive(name, val):
    if is_concrete(val) and not (np.isfinite(val) and val > 0):
        raise InvalidArgumentError(f"{name} must be a finite value > 0 (got {val})")
    return val


def require_non_negative(name, val):
    if is_concrete(val) and not (np.isfinite(val) and val >= 0):
        raise InvalidArgumentError(f"{name} must be a finite value >= 0 (got {val})")
    return val


def require_finite(name, values):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def require_length(name, values, minimum):
    if len(values) < minimum:
        raise InvalidArgumentError(f"{name} needs at least {minimum} samples (got {len(values)})")
    return values


def relative_error(learned, true):
    """|learned − true| / |true|；真值為 0 時回傳絕對誤差。"""
    if true == 0:
        return abs(learned)
    return abs(learned - true) / abs(true)


def relative_errors(learned, true):
    # 依 learned 的欄位順序 (ordered by learned names)
    return {name: relative_error(learned[name], true[name]) for name in learned if name in true}


def fmt(x, nd=3):
    try:
        return None if pd.isna(x) else (f"{x:.{nd}f}")
    except Exception:
        return x


def invalid_parameters(values, positive, non_negative):
    """回傳違反符號條件的 {name: value} (m, k > 0；b ≥ 0)。"""
    invalid = {}
    for name, value in values.items():
        if name in positive:
            ok = np.isfinite(value) and value > 0
        elif name in non_negative:
            ok = np.isfinite(value) and value >= 0
        else:
            continue
        if not ok:
            invalid[name] = value
    return invalid


def scale_free_errors(learned, true, anchor):
    """
    以 anchor (第一個質量) 為分母的比值誤差；只有比值能從資料辨識。

    鍵為 'b/m'、'k1/m1' 這類名稱。
    """
    if anchor not in learned or anchor not in true:
        return {}
    return {
        f'{name}/{anchor}': relative_error(learned[name] / learned[anchor], true[name] / true[anchor])
        for name in learned if name != anchor and name in true
    }
