"""Exception hierarchy. Everything raised on purpose derives from KtanError so
callers can catch library failures without masking programming mistakes."""


class KtanError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(KtanError, ValueError):
    """An argument violated a documented precondition."""


class NumericError(KtanError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class CapabilityError(KtanError):
    """The requested operation needs a resource the configuration rules out,
    e.g. a dense Hessian above the dimension cap."""


class ParseError(KtanError, ValueError):
    """A data file failed to parse. Carries the 1-based offending line."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InitializationError(KtanError):
    """Warm start failed to reach the entry accuracy. Carries the norm it
    did achieve so the caller can judge how far off it was."""

    def __init__(self, message, achieved_grad_norm=None):
        super().__init__(message)
        self.achieved_grad_norm = achieved_grad_norm


class StageError(KtanError):
    """One stage attempt failed in a recoverable way (the solve loop
    backtracks instead of aborting)."""


class SolverError(KtanError):
    """The solve loop gave up. Carries the trace collected so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class OracleError(KtanError):
    """A reference solution is inconsistent with what it is checked against."""
