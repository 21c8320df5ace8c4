"""
Exception hierarchy. Each error class carries the CLI exit code it maps to.
"""


class UnseenError(Exception):
    """Base class for all errors raised by the forecaster."""

    exit_code = 2


class UsageError(UnseenError):
    """Invalid invocation: bad flags, out-of-range parameters."""

    exit_code = 1


class PreconditionError(UsageError):
    """An operation was called outside the parameter range it is defined on."""


class DataError(UnseenError):
    """Input data is malformed or cannot support the requested computation."""

    exit_code = 2


class EstimateUndefinedError(DataError):
    """The requested estimate is undefined for this data (e.g. no observed species)."""


class PadeDegenerateError(DataError):
    """The Padé linear system is singular or the denominator vanishes at the evaluation point."""


class NumericGuardError(UnseenError):
    """A floating-point guard rejected the computation (overflow, non-finite values)."""

    exit_code = 3


class VacuousBoundError(NumericGuardError):
    """No admissible deviation makes the tail bound informative at the requested level."""
