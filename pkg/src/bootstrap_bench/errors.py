"""Exception types shared across the package."""


class BenchError(Exception):
    pass


class ConfigError(BenchError, ValueError):
    pass


class ShapeError(BenchError, ValueError):
    pass


class UsageError(BenchError, RuntimeError):
    pass


class TrainingError(BenchError, FloatingPointError):
    def __init__(self, message, layer_index):
        super().__init__(f"{message} (layer {layer_index})")
        self.layer_index = layer_index


class RolloutError(BenchError, FloatingPointError):
    def __init__(self, message, step_index):
        super().__init__(f"{message} (step {step_index})")
        self.step_index = step_index


class ReportingError(BenchError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
