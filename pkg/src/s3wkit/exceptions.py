"""Exception types raised across the package."""


class DomainError(ValueError):
    """Input lies outside the domain of a map (e.g. the north pole for the
    stereographic projection)."""


class UnsupportedDimensionError(ValueError):
    """Operation only implemented for specific sphere dimensions."""


class DegenerateStepError(ArithmeticError):
    """A retraction received a step that cancels the base point."""


class CapacityError(RuntimeError):
    """Problem size exceeds what an exact solver is configured to handle."""
