"""Exception types shared across the library."""


class FastFMError(Exception):
    """Base class for all errors raised by fastfm."""


class ParseError(FastFMError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class DataError(FastFMError, ValueError):
    """Structurally invalid data (shapes, index ranges, non-finite values)."""


class DivergenceError(FastFMError, ArithmeticError):
    """A solver produced non-finite values. Carries the failing iteration."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


class NotFittedError(FastFMError, AttributeError):
    """Estimator attribute accessed before fit."""


class StaleCachesError(FastFMError, ValueError):
    """Sample caches are inconsistent with the parameters they claim to mirror."""
