"""Exception types shared across the package."""


class GlparabError(Exception):
    """Base class for all library errors."""


class DomainError(GlparabError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConfigError(GlparabError, ValueError):
    """A configuration file or CLI argument could not be interpreted."""


class StepSizeError(GlparabError):
    """The fixed-step integrator cannot resolve the requested problem."""

    def __init__(self, message, suggested_step=None):
        super().__init__(message)
        self.suggested_step = suggested_step


class ScanRangeError(GlparabError):
    """Fewer roots than requested were found in the scan window."""


class SimplicityViolation(GlparabError):
    """Two eigenvalues fall within the simplicity tolerance.

    ``clusters`` holds (lambda_low, lambda_high) pairs for every offending
    group, including coincident double roots reported as (lam, lam).
    """

    def __init__(self, message, clusters=()):
        super().__init__(message)
        self.clusters = list(clusters)


class PicardDivergenceError(GlparabError):
    """Successive-approximation increments stopped decreasing."""


class UnderResolvedTrace(GlparabError):
    """A boundary trace does not resolve the requested number of modes."""


class GeneratingElementError(GlparabError):
    """The initial value has a vanishing inner product with an eigenfunction.

    ``mode`` is the 1-based index of the first vanishing mode.
    """

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class PreconditionError(GlparabError):
    """An operation's documented precondition failed on actual data."""


class ModeMergeWarning(UserWarning):
    """Two extracted decay rates are closer than the separation tolerance."""
