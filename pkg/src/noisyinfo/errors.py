"""Exception types raised across the package."""


class NoisyInfoError(Exception):
    """Base class for all package errors."""


class InvalidInput(NoisyInfoError, ValueError):
    pass


class InvalidParameters(NoisyInfoError, ValueError):
    pass


class DomainViolation(NoisyInfoError, ValueError):
    """A point lies outside the domain ball of the problem."""


class UnsupportedInstance(NoisyInfoError, NotImplementedError):
    pass


class ClassMismatch(NoisyInfoError, ValueError):
    """A functional declared linear is not an admissible linear functional."""


class AdmissibilityViolation(NoisyInfoError):
    """A functional or a noisy value breaks the measurement model."""


class RangeViolation(NoisyInfoError):
    pass


class ShapeMismatch(NoisyInfoError, ValueError):
    pass


class BudgetExceeded(NoisyInfoError):
    pass


class InfeasibleTruncation(NoisyInfoError):
    """The tail of the sequence is too large for the requested accuracy."""


class InconsistencyReport(NoisyInfoError):
    """Independent estimates of the same quantity do not overlap."""


class OutOfRegimeWarning(UserWarning):
    """An asymptotic formula was evaluated outside its stated range."""
