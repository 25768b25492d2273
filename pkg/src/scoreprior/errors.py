"""Exception types shared across the package."""


class ScorepriorError(Exception):
    """Base class for all package-specific errors."""


class DomainError(ScorepriorError, ValueError):
    """An argument left the mathematical domain of an operation."""


class SingularityError(ScorepriorError, ZeroDivisionError):
    """A score hit a removable-looking but fatal singularity (e.g. q' = 0)."""


class GridMismatchError(ScorepriorError, ValueError):
    """Two grids that must share an x-axis or shape do not."""


class StencilError(ScorepriorError, ValueError):
    """Grid too short for the finite-difference stencil requested."""


class ResolutionError(ScorepriorError, ValueError):
    """Step size too coarse for the requested integration."""


class ImproperPriorError(ScorepriorError, ValueError):
    """A normalised-density operation was called on an improper prior."""


class DataValidationError(ScorepriorError, ValueError):
    """An external dataset failed its integrity checks."""


class ConfigError(ScorepriorError, ValueError):
    """Invalid sampler or experiment configuration."""


class InitializationError(ScorepriorError, ValueError):
    """A sampler could not start from the supplied initial state."""


class DevianceError(ScorepriorError, RuntimeError):
    """A model-fit diagnostic encountered a non-finite deviance."""
