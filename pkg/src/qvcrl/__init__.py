"""Variational quantum circuit Q-learning on a numpy statevector simulator."""

from qvcrl.errors import ConfigError, InputError, UsageError

__version__ = "0.1.0"

__all__ = ["ConfigError", "InputError", "UsageError", "__version__"]
