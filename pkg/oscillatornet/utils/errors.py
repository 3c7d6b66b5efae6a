# oscillatornet/utils/errors.py


class OscillatorNetError(Exception):
    """所有 oscillatornet 錯誤的基底類別 (Base class for package errors)."""


class InvalidArgumentError(OscillatorNetError, ValueError):
    pass


class ZeroSpringError(OscillatorNetError, ZeroDivisionError):
    """耦合彈簧 k2 = 0 時無法建立投影 (projection undefined for k2 = 0)."""


class UnsupportedRegimeError(OscillatorNetError, ValueError):
    """解析解只支援欠阻尼 (only the underdamped closed form is available)."""


class DivergedForecastError(OscillatorNetError, ArithmeticError):
    def __init__(self, step, value, limit):
        self.step = step
        self.value = value
        self.limit = limit
        super().__init__(f"free forecast diverged at step {step}: |x| = {abs(value):.3g} > {limit:.3g}")


class DivergedTrainingError(OscillatorNetError, ArithmeticError):
    def __init__(self, iteration, loss):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"training diverged at iteration {iteration} (loss = {loss})")


class DataFileError(OscillatorNetError, OSError):
    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
