# oscillatornet/utils/const.py
import os

# ==========================================================
# 取樣與單位 (Sampling & units, SI throughout)
# ==========================================================

# 取樣間隔 Δ [s]：由組合權重的真值反推 (c = Δ·b1/m1)
DELTA = 0.0667

# Runge-Kutta 每個 Δ 內的子步數
RK4_SUBSTEPS = 100

# 預設初始條件 (單一振子 / 耦合振子)
DEFAULT_SINGLE_STATE = {'positions': [1.0], 'velocities': [0.0]}
DEFAULT_COUPLED_STATE = {'positions': [1.0, 0.5], 'velocities': [0.0, 0.0]}

# ==========================================================
# 訓練預設值 (Training defaults)
# ==========================================================
DEFAULT_LEARNING_RATE = 1e-2
DEFAULT_MAX_ITERATIONS = 5000
DEFAULT_TOLERANCE = 1e-12
DEFAULT_PATIENCE = 10
DEFAULT_LR_FLOOR = 1e-2
DEFAULT_RETRAIN_ITERATIONS = 50

# 自由預測發散門檻：|x| > 因子 × 訓練資料最大振幅
DIVERGENCE_FACTOR = 1e3

# ==========================================================
# Mapping / stencil
# ==========================================================
MAX_STENCIL_ACCURACY = 8
DEFAULT_STENCIL_ORDER = 5
WIDE_KERNEL_SIZE = 25
SUPPORTED_KERNELS = (1, WIDE_KERNEL_SIZE)
PADDING_MODES = ('causal', 'valid')

# ==========================================================
# 參數名稱 (Ordered parameter names, 與報表欄位一致)
# ==========================================================
SINGLE_NAMES = ('m', 'b', 'k')
CONSERVATIVE_NAMES = ('m', 'k')
COUPLED_NAMES = ('m1', 'm2', 'b1', 'b2', 'k1', 'k2')
COMBINED_NAMES = ('param_a', 'param_b', 'param_c', 'param_d', 'param_e')
RESNET_NAMES = ('theta',)

# 只觀測 x1 時能被梯度更新的子集 V
PARTIAL_TRAINABLE = {
    'canonical': ('m1', 'b1', 'k1', 'k2'),
    'combined': ('param_a', 'param_c', 'param_e'),
}

# 學到的權重必須滿足的符號條件
POSITIVE_NAMES = ('m', 'k', 'm1', 'm2', 'k1', 'k2', 'param_a', 'param_b', 'param_e')
NON_NEGATIVE_NAMES = ('b', 'b1', 'b2', 'param_c', 'param_d')

# 可訓練參數縮到初始值的這個比例以下視為塌縮 (collapsed)
COLLAPSE_RATIO = 1e-2

PARAM_UNITS = {
    'm': 'kg', 'm1': 'kg', 'm2': 'kg',
    'b': 'kg/s', 'b1': 'kg/s', 'b2': 'kg/s',
    'k': 'kg/s^2', 'k1': 'kg/s^2', 'k2': 'kg/s^2',
    'param_a': '1/s^2', 'param_b': '1/s^2', 'param_c': '1/s', 'param_d': '1/s', 'param_e': '-',
    'theta': '1/s',
}

# ==========================================================
# Flask app config 預設值
# ==========================================================
BASE_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

DEFAULT_APP_CONFIG = {
    'DELTA': DELTA,
    'OUTPUT_DIR': 'output',
    'EXPERIMENTS_DIR': os.path.join(BASE_DIR, 'experiments'),
    'SEED': 0,
    'LOG_LEVEL': 'INFO',
    'PROGRESS': True,
}

# CLI 結束碼
EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_ACCEPTANCE_FAILURE = 2
