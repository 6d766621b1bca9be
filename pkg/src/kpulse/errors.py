"""Exception hierarchy shared by every module of the package."""


class PulseError(Exception):
    """Base class for all errors raised by kpulse."""


class DomainError(PulseError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class UsageError(PulseError, ValueError):
    """Inconsistent or unknown options (bad method tag, mismatched grids, ...)."""


class NumericalError(PulseError, ArithmeticError):
    """Non-finite values or a breakdown of a numerical procedure."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class CurvatureError(NumericalError):
    """The phase of a pulse is undefined because a curve has (near) zero curvature."""


class DegenerateCurveError(NumericalError):
    """A k-space curve has vanishing speed on a whole subinterval."""


class FormatError(PulseError, OSError):
    """A data file exists but cannot be parsed."""
