"""Exception types shared across the package."""


class WindfuseError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(WindfuseError, ValueError):
    """Tensor or array shapes are incompatible for the requested operation."""


class GraphStateError(WindfuseError, RuntimeError):
    """An autodiff or optimizer call was made in an invalid state."""


class DataError(WindfuseError, ValueError):
    """Input data violates the ingestion contract (gaps, ranges, missing NWP)."""


class CalmWindError(WindfuseError, ValueError):
    """Wind direction requested for a zero wind vector."""


class NumericError(WindfuseError, ArithmeticError):
    """A numeric routine failed (for example a singular linear system)."""
