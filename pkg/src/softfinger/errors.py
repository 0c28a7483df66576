"""Exception types shared across the models."""


class ModelDomainError(ValueError):
    """A constitutive or kinematic evaluation left the model's range of validity."""


class SaturationError(ModelDomainError):
    """No equilibrium exists inside the admissible bracket (e.g. pressure too high)."""

    def __init__(self, message, pressure=None):
        super().__init__(message)
        self.pressure = pressure


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PlantError(RuntimeError):
    """The pneumatic plant reached a non-physical state (e.g. negative gas mass)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(ValueError):
    def __init__(self, message, key=None, violations=None):
        super().__init__(message)
        self.key = key
        self.violations = list(violations or [])


class CalibrationError(ValueError):
    """The calibration objective could not be evaluated at ``parameters``."""

    def __init__(self, message, parameters=None):
        super().__init__(message)
        self.parameters = dict(parameters or {})
