"""Exception types shared across the package.

The CLI maps these onto distinct exit codes (config 2, numerics 3,
capacity 4), so library code should raise the most specific one.
"""


class NucdecayError(Exception):
    """Base class for all package errors."""


class ConfigError(NucdecayError):
    """Invalid or unknown configuration input."""


class NumericsError(NucdecayError):
    """Numerical evaluation failed (divergence, non-convergence)."""


class PolylogDivergenceError(NumericsError):
    """Polylogarithm evaluated at a divergent point on the unit circle."""


class IntegrationError(NumericsError):
    """ODE integration failed; carries the last good state if available."""

    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class CapacityError(NucdecayError):
    """Requested system size exceeds a hard resource cap."""
