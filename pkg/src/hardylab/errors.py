"""Shared exception types."""


class HardyLabError(Exception):
    pass


class DegenerateConfigurationError(HardyLabError, ValueError):
    """Coincident poles, bad weights or otherwise unusable pole data."""


class SingularEvaluationError(HardyLabError, ValueError):
    """Evaluation requested at (or too close to) a pole."""


class TieSetError(HardyLabError, ValueError):
    """Gradient requested on the measure-zero tie set between poles."""


class DivergentIntegralError(HardyLabError, ArithmeticError):
    """The requested integral does not converge."""


class EigensolveError(HardyLabError, RuntimeError):
    """Eigenvalue iteration failed to converge; carries the best iterate."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
