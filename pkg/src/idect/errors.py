"""Exception and warning types raised by idect."""


class IdectError(Exception):
    """Base class for all idect errors."""


class DomainError(IdectError, ValueError):
    """A point or parameter lies outside the interval [0, T]."""


class BasisMismatch(IdectError, ValueError):
    """Two series live in different coefficient spaces or domains."""


class ResolutionFailure(IdectError):
    """Adaptive construction hit its degree cap before the coefficients decayed."""


class DegreeError(IdectError, ValueError):
    """An operator band would be clipped by the requested truncation."""


class DomainMismatch(IdectError, ValueError):
    """Operands were constructed on different intervals."""


class TruncationError(IdectError, ValueError):
    """Requested truncation is too small for the operator."""


class MissingFlippedKernel(IdectError, ValueError):
    """A Fredholm kernel pair is missing k(-t) in standard mode."""


class DimensionMismatch(IdectError, ValueError):
    """Matrix or vector dimensions do not agree."""


class SingularSystem(IdectError, ArithmeticError):
    """The almost-banded factorization met a vanishing pivot."""

    def __init__(self, column, pivot=None):
        self.column = column
        self.pivot = pivot
        msg = f"singular system: pivot in column {column}"
        if pivot is not None:
            msg += f" has magnitude {abs(pivot):.3e}"
        super().__init__(msg)


class ConstraintCountMismatch(IdectError, ValueError):
    """Number of constraints differs from the differential order."""


class ExpressionError(IdectError, ValueError):
    """Base class for expression parsing and evaluation errors."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed expression text.

    Attributes:
        offset: Byte offset of the offending token in the source.
        expected: Set of token descriptions that would have been accepted.
    """

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += " (expected " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


class UnknownFunction(ExpressionError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown function {name!r} at offset {offset}")


class ArityError(ExpressionError):
    def __init__(self, name, expected, got, offset):
        self.name = name
        self.offset = offset
        super().__init__(
            f"{name}() takes {expected} argument(s), got {got} (offset {offset})"
        )


class EvalError(ExpressionError, ArithmeticError):
    """Domain violation while evaluating an expression (log of negative etc.)."""


class RangeError(ExpressionError):
    """Special-function argument outside the supported envelope."""


class ProblemFileError(IdectError, ValueError):
    """Malformed problem file; carries the offending location when known."""

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class MaxNReached(UserWarning):
    """Adaptive solve stopped at its size cap without a decay certificate."""
