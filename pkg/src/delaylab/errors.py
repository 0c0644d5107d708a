"""Exception hierarchy shared by the package.

Validation problems derive from ``ValueError``; numeric failures (a solver
that does not converge, a construction that cannot be realized) derive from
``NumericError``.  The command line maps the two families to distinct exit
codes.
"""

from .piecewise import DomainError


class SpecError(ValueError):
    """A problem instance is malformed (bad history coverage, bad delay)."""


class InvariantError(SpecError):
    """A structural invariant such as ``tau(t) <= t`` is violated."""


class ThresholdError(DomainError):
    """The delay parameter is too close to (or below) the 1/e threshold."""


class NumericError(RuntimeError):
    """An iterative computation failed to converge or a construction failed."""


class ExactModeError(NumericError):
    """A cell has no closed-form solution in the supported function class."""


class NotOscillatoryError(ValueError):
    """A trajectory has too few zeros for semicycle analysis."""


class ConstructionError(NumericError):
    """An explicit construction cannot be realized for the requested parameters."""


__all__ = ["DomainError", "SpecError", "InvariantError", "ThresholdError",
           "NumericError", "ExactModeError", "NotOscillatoryError", "ConstructionError"]
