# oscillatornet/utils/data_io.py
import json
import logging
import os
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from ..models import Trajectory
from .data_transform import trajectories_to_frame
from .errors import DataFileError

logger = logging.getLogger(__name__)

# 全精度十進位 (full double precision)
FLOAT_FORMAT = '%.17g'


# ==========================================================
# 內部輔助函式 (Internal Helper Functions)
# ==========================================================

def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise DataFileError(parent, f"cannot create directory ({e.strerror or e})") from e


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


# ==========================================================
# CSV
# ==========================================================

def write_csv(df: pd.DataFrame, path: str) -> str:
    """寫出 CSV (不含 index、時間戳記)，失敗時帶路徑拋出 DataFileError。"""
    _ensure_parent(path)
    try:
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise DataFileError(path, f"cannot write CSV ({e.strerror or e})") from e
    logger.debug("wrote %s (%d rows)", path, len(df))
    return path


def write_trajectory_csv(path: str, trajectories: Union[Trajectory, List[Trajectory]]) -> str:
    """header 為 t,x1[,x2...]，每個取樣點一列。"""
    return write_csv(trajectories_to_frame(trajectories), path)


def read_trajectory_csv(path: str):
    """
    讀回 write_trajectory_csv 的輸出 (Load a trajectory CSV).

    Returns:
    tuple of Trajectory，依 x1, x2, ... 排序
    """
    try:
        df = pd.read_csv(path)
    except FileNotFoundError as e:
        raise DataFileError(path, "file not found") from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFileError(path, f"cannot read CSV ({e})") from e

    channels = [c for c in df.columns if c.startswith('x') and c[1:].isdigit()]
    if 't' not in df.columns or not channels:
        raise DataFileError(path, "expected columns t,x1[,x2...]")
    t = df['t'].to_numpy(dtype=np.float64)
    if len(t) < 2:
        raise DataFileError(path, "need at least two samples to recover the sampling step")
    delta = float(np.mean(np.diff(t)))
    channels.sort(key=lambda c: int(c[1:]))
    return tuple(Trajectory(df[c].to_numpy(dtype=np.float64), delta, float(t[0])) for c in channels)


# ==========================================================
# JSON
# ==========================================================

def write_json(path: str, payload: Dict[str, Any]) -> str:
    _ensure_parent(path)
    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, ensure_ascii=False, default=_json_default)
            f.write('\n')
    except OSError as e:
        raise DataFileError(path, f"cannot write JSON ({e.strerror or e})") from e
    return path


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise DataFileError(path, "file not found") from e
    except json.JSONDecodeError as e:
        raise DataFileError(path, f"invalid JSON at line {e.lineno}: {e.msg}") from e
    except OSError as e:
        raise DataFileError(path, f"cannot read file ({e.strerror or e})") from e


def write_text(path: str, text: str) -> str:
    _ensure_parent(path)
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text if text.endswith('\n') else text + '\n')
    except OSError as e:
        raise DataFileError(path, f"cannot write file ({e.strerror or e})") from e
    return path
