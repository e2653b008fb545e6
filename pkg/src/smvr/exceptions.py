"""Exception hierarchy used across the package."""


class SMVRError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(SMVRError, ValueError):
    """An argument breaks a documented precondition (shape, range, finiteness)."""


class ConfigurationError(SMVRError, ValueError):
    """A problem, schedule or experiment is configured inconsistently."""


class DomainError(SMVRError, ArithmeticError):
    """A level function produced a non-finite value or was evaluated off its domain.

    ``level`` is the zero-based level index when known, ``iteration`` the
    optimizer iteration when the error surfaced inside a run.
    """

    def __init__(self, message, level=None, iteration=None):
        super().__init__(message)
        self.level = level
        self.iteration = iteration

    def __str__(self):
        msg = super().__str__()
        if self.level is not None:
            msg = f"level {self.level}: {msg}"
        if self.iteration is not None:
            msg = f"iteration {self.iteration}: {msg}"
        return msg


class ParseError(SMVRError, ValueError):
    """A data or trace file could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class AlignmentError(SMVRError, ValueError):
    """Traces cannot be compared on a common sample-budget grid."""


class InsufficientDataError(SMVRError, ValueError):
    """Too few points to fit a rate exponent."""
