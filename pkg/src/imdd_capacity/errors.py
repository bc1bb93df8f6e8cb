"""Exception types raised by the solvers."""


class CapacityError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CapacityError, ValueError):
    """Invalid solver or experiment configuration."""


class InfeasibleConstraintError(CapacityError, ValueError):
    """A moment budget cannot be met on the given support."""

    def __init__(self, target, low, high):
        self.target = target
        self.low = low
        self.high = high
        super().__init__(
            f"target moment {target!r} is outside the feasible interval "
            f"({low!r}, {high!r})"
        )


class ConvergenceError(CapacityError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""
