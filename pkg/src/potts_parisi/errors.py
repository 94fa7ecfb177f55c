"""Exception types raised by the solver.

Input-validation problems derive from :class:`ValueError`; failures of a
numerical routine on valid input derive from :class:`ComputationError`.
The CLI maps the first family to exit code 2 and the second to exit code 1.
"""


class InvalidPathError(ValueError):
    """A step function violates monotonicity or range constraints."""


class NotPSDError(ValueError):
    """A matrix increment has a negative eigenvalue beyond tolerance."""


class LocationMismatchError(ValueError):
    """A cascade's levels do not match the jump locations of a path."""


class ComputationError(RuntimeError):
    """A numerical routine could not produce a trustworthy value."""


class GridError(ComputationError):
    """The spatial grid is too small or too coarse for the problem."""


class CFLError(ComputationError):
    """An explicit time-stepping scheme would be unstable."""


class StateSpaceTooLargeError(ComputationError):
    """Exact enumeration was requested over too many configurations."""


class ConvergenceError(ComputationError):
    """An iterative optimizer stopped before meeting its tolerances."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
