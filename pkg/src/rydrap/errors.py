"""Exception types shared across the package.

Each maps to a distinct CLI exit code so batch drivers can tell a bad config
from a blown-up integration from an oversized problem.
"""


class ConfigError(ValueError):
    """Invalid configuration or arguments; the message names the offending field."""


class NumericalInstabilityError(RuntimeError):
    """The integrator produced non-finite or out-of-bounds values.

    Carries the first simulation time (us) at which the check tripped.
    """

    def __init__(self, message: str, t_us: float):
        super().__init__(message)
        self.t_us = t_us


class ResourceRefusalError(RuntimeError):
    """Problem size exceeds what the requested solver is allowed to attempt."""
