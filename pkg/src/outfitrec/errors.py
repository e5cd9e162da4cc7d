"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(ValueError):
    """Input is outside the mathematical domain of the operation."""


class ConsistencyError(RuntimeError):
    """Internal state disagrees with what an operation requires."""


class DatasetError(ValueError):
    """Manifest, blob or question data violates the on-disk contract."""


class SyntheticSpecError(ValueError):
    """Synthetic generation parameters are infeasible."""


class UnseenTypePairError(KeyError):
    """No compatibility space was trained for this pair of item types."""


class MetricUndefinedError(RuntimeError):
    """A requested metric has no defined value on the given inputs."""
