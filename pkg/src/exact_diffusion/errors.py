"""Exception hierarchy shared across the package."""


class ExactDiffusionError(Exception):
    """Base class for all package-specific errors."""


class DomainError(ExactDiffusionError, ValueError):
    """An argument violates a documented precondition."""


class DriftValidationError(ExactDiffusionError):
    """A drift specification failed one of its checkable assumptions."""


class UnsupportedDriftError(ExactDiffusionError):
    """The requested operation has no exact construction for this drift."""


class EnvelopeViolationError(ExactDiffusionError):
    """A rejection-sampling envelope was exceeded at runtime.

    This always indicates a mis-specified bound, never a recoverable
    condition; the offending proposal is reported in the message.
    """


class RoundLimitError(ExactDiffusionError):
    """The top-level rejection loop hit its round cap."""


class QuadratureError(ExactDiffusionError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ConfigError(ExactDiffusionError, ValueError):
    """An experiment configuration file is malformed or inconsistent."""
