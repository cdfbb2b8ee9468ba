"""Shared exception types."""


class ConfigurationError(ValueError):
    """Raised when a parameter or structural input violates an invariant."""


class SchedulingError(RuntimeError):
    """Raised when a scheduler is invoked on an empty candidate set."""
