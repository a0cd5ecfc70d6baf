"""Exception hierarchy shared across modules."""

from __future__ import annotations


class NonlocalError(Exception):
    """Base class for all package errors."""


class ResolutionError(NonlocalError, ValueError):
    """A grid is too coarse for a kernel or resource support."""


class QuadratureError(NonlocalError, ValueError):
    """Discrete boundary mass overshoots 1 beyond tolerance."""


class BackendError(NonlocalError, ValueError):
    """Operator backend is incompatible with the grid."""


class NoSteadyStateError(NonlocalError):
    """The principal value is nonpositive, so no positive steady state exists."""

    def __init__(self, message: str, mu0: float | None = None):
        super().__init__(message)
        self.mu0 = mu0


class ConvergenceError(NonlocalError):
    """An iteration exhausted its budget.  ``result`` holds the last iterate."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class MonotonicityError(NonlocalError):
    """The monotone fixed-point scheme produced an increasing iterate."""


class StabilityError(NonlocalError, ValueError):
    """Explicit time step violates the positivity bound, or the state went negative."""


class ConfigError(NonlocalError, ValueError):
    """Invalid experiment configuration.  ``errors`` lists every problem found."""

    def __init__(self, errors: list[str] | str):
        if isinstance(errors, str):
            errors = [errors]
        super().__init__("; ".join(errors))
        self.errors = list(errors)
