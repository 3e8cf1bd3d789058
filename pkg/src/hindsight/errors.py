"""Exception types. Each family maps to a distinct CLI exit code."""


class HindsightError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(HindsightError, ValueError):
    """Invalid parameters, grids or configuration files."""

    exit_code = 2


class DataError(HindsightError, ValueError):
    """Malformed or inconsistent outcome data."""

    exit_code = 3


class DesignError(DataError):
    """Group structure that the regret formulas cannot handle."""


class NumericalError(HindsightError, ArithmeticError):
    """A numerical routine failed to deliver its contract."""

    exit_code = 4


class InvalidMatrixError(NumericalError, ValueError):
    """Matrix with negative, nonfinite or non-square entries."""


class DomainError(NumericalError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class ConvergenceError(NumericalError):
    """Iteration limit reached; ``residual`` holds the last residual."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
