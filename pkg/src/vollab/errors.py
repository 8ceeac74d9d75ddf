"""Exception hierarchy shared by every vollab module."""


class VollabError(Exception):
    """Base class for all errors raised by vollab."""


class ParseError(VollabError, ValueError):
    """Input bytes do not conform to the expected schema."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ValidationError(VollabError, ValueError):
    """Input parsed but violates a domain invariant."""


class DomainError(VollabError, ValueError):
    """Argument outside the domain of an operation."""


class NumericError(VollabError, ArithmeticError):
    """A computation produced a non-finite value."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class CalibrationError(VollabError, RuntimeError):
    """Fitting or calibration could not produce a usable result."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class TransportError(VollabError, OSError):
    """Network-level failure while fetching remote data."""


class StatusError(VollabError):
    """Remote endpoint answered with a non-2xx status."""

    def __init__(self, status, message=None):
        super().__init__(message or f"HTTP status {status}")
        self.status = status
