"""Exception hierarchy shared by all lrvlab modules."""


class LrvError(Exception):
    """Base class for lrvlab errors."""


class DomainError(LrvError, ValueError):
    """An argument lies outside the domain of an operation."""


class InsufficientDataError(DomainError):
    """The series is too short for the requested configuration."""


class ConfigError(LrvError, ValueError):
    """An estimator or kernel configuration is inconsistent."""


class NumericError(LrvError, ArithmeticError):
    """A numerical procedure failed or produced a degenerate value."""


class FactorizationError(NumericError):
    """Spectral factorization of a difference-sequence profile failed.

    Attributes
    ----------
    iterations : int
        Number of refinement iterations performed.
    residual : float
        Final max-abs residual of the lagged-product equations.
    """

    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class DataError(DomainError):
    """Malformed input data; ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message, row=None, column=None):
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.row = row
        self.column = column
