"""Exception hierarchy.

Two families matter to callers: configuration problems (exit code 2 on the
command line) and numerical failures (exit code 3).
"""


class TalbotError(Exception):
    """Base class for all package errors."""


class InvalidConfigurationError(TalbotError, ValueError):
    """Inputs violate a physical or structural precondition."""


class InvalidMaterialError(InvalidConfigurationError):
    """Optical response cannot produce the requested grating phase."""


class NumericalFailureError(TalbotError, ArithmeticError):
    """A quadrature, series or normalisation did not meet its tolerance."""


class NumericalConsistencyError(NumericalFailureError):
    """A result violates an invariant it must satisfy (e.g. negative density)."""


class FormulaDomainError(NumericalFailureError):
    """The closed-form Talbot coefficient is evaluated outside its real domain.

    Raised when the base of a half-integer power is negative. Callers may opt
    into the analytic continuation instead.
    """


class InfiniteDivergenceError(NumericalFailureError):
    """Posterior mass sits where the reference density vanishes."""


class DegenerateObjectiveError(TalbotError, ValueError):
    """The design objective is flat, usually because the reference theta is 0."""


class BracketingError(NumericalFailureError):
    """Bisection could not straddle the target value.

    Attributes
    ----------
    bounds : tuple
        ``(low_value, high_value)`` reached before giving up.
    """

    def __init__(self, message, bounds=None):
        super().__init__(message)
        self.bounds = bounds


class TalbotDomainWarning(UserWarning):
    """Emitted when the analytic continuation of the Talbot sum is used."""
