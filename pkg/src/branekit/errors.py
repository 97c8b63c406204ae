"""Exception types shared across the package."""


class BraneError(Exception):
    """Base class for all package errors."""


class ChartDomainError(BraneError):
    """A point left the coordinate chart of the ambient model."""


class DegenerateMetricError(BraneError):
    """Induced metric is (numerically) degenerate at some node."""


class NormalFrameError(BraneError):
    """Could not construct a full orthonormal spacelike normal frame."""


class ShapeError(BraneError):
    """Field shapes or index kinds do not match the operation."""


class BudgetError(BraneError):
    """Requested dense/sparse assembly exceeds the degree-of-freedom budget."""


class ConvergenceError(BraneError):
    """Iterative solve failed to reach its residual target."""


class ConfigError(BraneError):
    """Invalid run configuration; message carries the offending key path."""
