"""Exception hierarchy. The CLI maps these onto exit codes."""


class PathParseError(Exception):
    """Base class for all package errors."""


class ValidationError(PathParseError, ValueError):
    """Input violates a documented invariant (CLI exit code 2)."""


class EndpointBlockedError(ValidationError):
    pass


class SliceCountError(ValidationError):
    pass


class StepSizeError(ValidationError):
    pass


class BudgetExceededError(ValidationError):
    """Requested work exceeds a configured budget; carries the exact size."""

    def __init__(self, message, count):
        super().__init__(message)
        self.count = count


class AlreadyEvaluatedError(ValidationError):
    pass


class NormalizationError(ValidationError):
    """Every joint probability is zero, so no conditional distribution exists."""


class StructuralError(ValidationError):
    """A partition is not a disjoint cover of the ensemble."""


class NumericalIntegrityError(PathParseError, ArithmeticError):
    """A result that is impossible in exact arithmetic (CLI exit code 3)."""
