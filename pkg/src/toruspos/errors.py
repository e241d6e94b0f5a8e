"""Exception types shared across the toolkit."""


class TorusposError(Exception):
    """Base class for all toolkit errors."""


class GeometryMismatchError(TorusposError, ValueError):
    """Two fields do not live on the same discretized torus."""


class MeanNotZeroError(TorusposError, ValueError):
    """Right-hand side of the constant-coefficient elliptic solve has a
    nonzero grid mean, so no periodic solution exists."""


class NonConstantMetricError(TorusposError, ValueError):
    """An operation that requires a constant base metric received a metric
    field that varies over the grid."""


class NotQPositiveError(TorusposError, ValueError):
    """The curvature field is not q-positive on the grid, so the exponential
    rescaling transform is undefined."""


class UnsupportedDimensionError(TorusposError, ValueError):
    """Operation only implemented for complex dimension n <= 2."""


class ConfigError(TorusposError, ValueError):
    """Command-line configuration is missing, unparseable, or inconsistent."""


class InternalInvariantError(TorusposError, RuntimeError):
    """A quantity the implementation guarantees was violated at runtime.

    This always indicates a bug or a numerically hostile input, never a
    negative verdict.
    """
