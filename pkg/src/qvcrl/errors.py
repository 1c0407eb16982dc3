class ConfigError(ValueError):
    """Invalid shapes, indices, or hyperparameters."""


class InputError(ValueError):
    """Invalid observation data (e.g. non-finite values)."""


class UsageError(RuntimeError):
    """Operation called in the wrong state (stepping a finished episode, sampling an empty buffer)."""
