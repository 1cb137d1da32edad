"""Exception types shared across the package."""


class AveropError(Exception):
    """Base class for all package-specific errors."""


class DivergedError(AveropError):
    """An iteration produced a non-finite iterate.

    Carries the offending application index and the partial trace collected
    up to that point (``trace`` may be None when divergence happens before
    any row was recorded).
    """

    def __init__(self, step, trace=None):
        super().__init__(f"non-finite iterate at operator application {step}")
        self.step = step
        self.trace = trace


class AdmissibilityError(AveropError):
    """A scheme parameter is outside its admissible range."""


class InvalidSpectrumError(AveropError):
    """An eigenvalue argument is outside the range a formula supports."""


class AnalysisError(AveropError):
    """A spectral analysis step (eigen-solver, power iteration) failed."""


class SubproblemError(AveropError):
    """An inner solver (Newton, linear solve) failed to reach its tolerance."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class ConfigError(AveropError):
    """A scenario configuration is invalid; raised before any compute."""


class DatasetError(AveropError):
    """A dataset file is malformed or unusable."""
