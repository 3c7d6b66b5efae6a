import numpy as np
import pandas as pd

from ..models import Trajectory
from .errors import InvalidArgumentError


def _as_list(trajectories):
    if isinstance(trajectories, Trajectory):
        return [trajectories]
    return list(trajectories)


def trajectories_to_frame(trajectories):
    """多條等長軌跡 → DataFrame 欄位 t, x1, x2, ..."""
    trajectories = _as_list(trajectories)
    if not trajectories:
        raise InvalidArgumentError("no trajectories to tabulate")
    n = len(trajectories[0])
    if any(len(tr) != n for tr in trajectories):
        raise InvalidArgumentError("trajectories must have the same length")
    df = pd.DataFrame({'t': trajectories[0].times})
    for i, tr in enumerate(trajectories, start=1):
        df[f'x{i}'] = tr.samples
    return df


def forecast_frame(truth, forecast):
    """
    與模擬輸出相同欄位，外加 source ∈ {truth, forecast}。
    truth 是整段真值 (訓練窗 + 延續)，forecast 是自由預測。
    """
    df_truth = trajectories_to_frame(truth)
    df_truth['source'] = 'truth'
    df_forecast = trajectories_to_frame(forecast)
    df_forecast['source'] = 'forecast'
    return pd.concat([df_truth, df_forecast], ignore_index=True)


def mapping_frame(x1, x2_true, x2_mapped, mode, padding):
    """欄位 t,x1,x2_true,x2_mapped,mode,padding；valid 模式下前幾點沒有映射值 (NaN)。"""
    df = pd.DataFrame({'t': x1.times, 'x1': x1.samples, 'x2_true': x2_true.samples})
    mapped = pd.Series(x2_mapped.samples, index=np.round(x2_mapped.times / x1.delta).astype(int))
    index = np.round(x1.times / x1.delta).astype(int)
    df['x2_mapped'] = mapped.reindex(index).to_numpy()
    df['mode'] = mode
    df['padding'] = padding
    return df


def continuation(truth, start, length):
    """取真值軌跡 [start, start + length) 作為預測比對用的延續段。"""
    return [tr.window(start, start + length) for tr in _as_list(truth)]


def rmse(a, b):
    a = a.samples if isinstance(a, Trajectory) else np.asarray(a, dtype=np.float64)
    b = b.samples if isinstance(b, Trajectory) else np.asarray(b, dtype=np.float64)
    if len(a) != len(b):
        raise InvalidArgumentError(f"cannot compare series of length {len(a)} and {len(b)}")
    if len(a) == 0:
        return 0.0
    return float(np.sqrt(np.mean((a - b) ** 2)))


def relative_rmse(forecast, truth, peak):
    """RMSE / peak，peak 通常取整段真值的最大 |x|。"""
    return rmse(forecast, truth) / peak


def peak_decay(samples, split):
    """前後兩段最大 |x| 的比值 1 − max_after / max_before (衰減比例)。"""
    samples = np.abs(np.asarray(samples, dtype=np.float64))
    before, after = samples[:split].max(), samples[split:].max()
    return float(1.0 - after / before)
