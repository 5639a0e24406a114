"""Exception hierarchy shared by all nhtrap modules."""


class NHTrapError(Exception):
    """Base class for library errors."""


class DomainError(NHTrapError, ValueError):
    """An input lies outside the domain an operation accepts."""


class PreconditionError(NHTrapError, ValueError):
    """A documented precondition of an operation is violated."""


class IntegrationError(NHTrapError, RuntimeError):
    """The flow integrator produced a non-finite derivative."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class RateUncertainError(NHTrapError, RuntimeError):
    """An exponent fit is too noisy to report a rate."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegeneratePointError(NHTrapError, ValueError):
    """Both a defining function and its transverse derivative vanish."""


class HorizonTooShortError(NHTrapError, RuntimeError):
    """The truncated tail of a flow integral is not negligible."""


class SolverError(NHTrapError, RuntimeError):
    """Eigenvalue iteration failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NormUncertainError(NHTrapError, RuntimeError):
    """Inverse iteration for the smallest singular value stagnated."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class CapExceededError(NHTrapError, RuntimeError):
    """Too many angular modes contribute to a window."""


class CoverageError(NHTrapError, ValueError):
    """A resonance set does not cover the requested counting box."""


class ConfigError(NHTrapError, ValueError):
    """An experiment configuration failed validation."""


class AliasingRiskError(NHTrapError, ValueError):
    """A symbol does not decay at the edge of the discrete frequency window."""
