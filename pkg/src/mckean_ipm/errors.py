"""Exception hierarchy shared across the package."""


class MckeanIPMError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MckeanIPMError, ValueError):
    """Non-finite or otherwise malformed numeric input."""


class ShapeError(MckeanIPMError, ValueError):
    """Grid, dimension or array-shape mismatch."""


class OutOfRangeError(MckeanIPMError, IndexError):
    """Requested history not present in a trajectory buffer."""


class DomainError(MckeanIPMError, ValueError):
    """Request outside the mathematical domain of an operation."""


class CapExceededError(MckeanIPMError, ValueError):
    """Exact optimal transport problem larger than the configured cap."""


class PreconditionError(MckeanIPMError, ValueError):
    """A required inequality on the structural constants does not hold."""


class ConfigError(MckeanIPMError, ValueError):
    """Invalid configuration value; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericalBlowupError(MckeanIPMError, FloatingPointError):
    """Drift or diffusion produced a non-finite value during time stepping."""

    def __init__(self, particle, step, what="state"):
        self.particle = int(particle)
        self.step = int(step)
        super().__init__(
            f"non-finite {what} for particle {self.particle} at step {self.step}"
        )
