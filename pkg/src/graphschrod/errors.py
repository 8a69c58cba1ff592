"""Exception hierarchy shared by every module of the package."""


class GraphSchrodError(Exception):
    """Base class for all package errors."""


class NonPositiveWeight(GraphSchrodError, ValueError):
    pass


class ZeroWeight(NonPositiveWeight):
    pass


class UnboundedTail(GraphSchrodError, ValueError):
    """An infinite neighbor support was summed without a tail bound."""


class NotLocallyFinite(GraphSchrodError, ValueError):
    pass


class DomainViolation(GraphSchrodError, ValueError):
    pass


class NegativeInput(GraphSchrodError, ValueError):
    pass


class NegativePerturbation(NegativeInput):
    pass


class NotNonnegative(NegativeInput):
    pass


class MissingDegree(GraphSchrodError, ValueError):
    pass


class NotAnEigenvector(GraphSchrodError, ValueError):
    pass


class NotLowerBounded(GraphSchrodError, ArithmeticError):
    pass


class NoConvergence(GraphSchrodError, ArithmeticError):
    pass


class ShiftTooSmall(GraphSchrodError, ValueError):
    pass


class IndexMismatch(GraphSchrodError, ValueError):
    pass


class MonotonicityViolation(GraphSchrodError, ValueError):
    pass


class SelectionFailure(GraphSchrodError, RuntimeError):
    pass


class SpecError(GraphSchrodError, ValueError):
    """A graph-spec file could not be parsed."""
