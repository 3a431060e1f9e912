"""Exception types shared across the package."""


class LPTokenError(Exception):
    """Base class for all package errors."""


class DomainError(LPTokenError, ValueError):
    """An input is outside the mathematical domain of the operation."""


class RegimeError(LPTokenError, ValueError):
    """Operation requested outside the deposit-optimal regime (gamma_hat >= gamma_star)."""


class NotDefinedError(LPTokenError, ValueError):
    """The requested quantity does not exist for these parameters."""


class InsufficientDataError(LPTokenError, ValueError):
    """Not enough observations to run the estimator."""


class ParseError(LPTokenError, ValueError):
    """A swap-event file failed validation; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
