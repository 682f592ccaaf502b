"""Exception types shared across the toolkit."""


class BoxcastError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(BoxcastError):
    """Operands have incompatible shapes or alphabets."""


class ValidationError(BoxcastError):
    """An object violates its defining invariants."""


class SignallingError(BoxcastError):
    """A marginal that should be input-independent is not."""


class ConditioningError(BoxcastError):
    """Conditioning on an event of numerically zero probability."""


class CapacityError(BoxcastError):
    """A vertex catalogue would exceed the configured size cap."""


class SolverError(BoxcastError):
    """A linear program or feasibility solver failed numerically."""


class OptimizationError(BoxcastError):
    """An iterative optimizer failed to produce a usable iterate."""
