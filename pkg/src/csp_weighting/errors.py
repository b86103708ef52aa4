"""Exception types raised across the package."""


class CspError(Exception):
    """Base class for every error raised by csp_weighting."""


class MalformedInstanceError(CspError, ValueError):
    pass


class CapacityError(CspError):
    """Raised when an exhaustive enumeration would exceed the configured cap."""


class DuplicateSolutionError(CspError, ValueError):
    pass


class UnknownSolutionError(CspError, KeyError):
    pass


class PreconditionError(CspError, ValueError):
    pass


class ParameterError(CspError, ValueError):
    pass


class EmptyComponentError(CspError, ValueError):
    pass


class FormatError(CspError, ValueError):
    """Raised by the text-format parsers, with the offending line number."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ExternalFormulaRequired(CspError, RuntimeError):
    """The cover exponent f is not shipped and must be supplied as a plugin."""
