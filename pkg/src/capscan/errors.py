"""Exception types raised across the package."""


class CapscanError(Exception):
    """Base class for all package errors."""


class GeometryError(CapscanError):
    """Invalid probe or sample geometry."""


class ResolutionError(CapscanError):
    """Grid resolution too coarse for the smallest feature."""


class BoundsError(CapscanError):
    """A defect or scan position falls outside the sample domain."""


class BoundaryConditionError(CapscanError):
    """Ill-posed boundary conditions (e.g. no drive nodes)."""


class ConvergenceError(CapscanError):
    """Iterative solver failed to reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SamplingError(CapscanError):
    """Sample rate violates the Nyquist requirement."""


class PeriodAlignmentError(CapscanError):
    """Time series does not span an integer number of reference periods."""


class DegenerateRangeError(CapscanError):
    """Image has no value range (constant), min-max normalization undefined."""


class DimensionMismatchError(CapscanError):
    """Two images that must share a shape do not."""


class CsvParseError(CapscanError):
    """Malformed scan or time-series CSV."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class ConfigError(CapscanError):
    """Configuration file violates the schema."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
