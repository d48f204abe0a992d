"""Exception types shared across the pipeline stages."""


class FloodTriageError(Exception):
    """Base class for all pipeline errors."""


class TransformMismatch(FloodTriageError):
    """Operands do not share a geotransform (co-registration contract)."""


class NonPositiveCell(FloodTriageError):
    """Linear-scale raster contains a cell <= 0 where a log is required."""


class EmptyStack(FloodTriageError):
    """Raster stack holds no layers."""


class BadKernel(FloodTriageError):
    """Filter kernel size is even or too small."""


class NoDrainage(FloodTriageError):
    """Drainage mask contains no cells."""


class ReferenceTooSmall(FloodTriageError):
    """Scene-statistics reference region selects too few cells."""


class DegenerateModel(FloodTriageError):
    """Likelihood model has a non-positive standard deviation."""


class EmptyMask(FloodTriageError):
    """Flood mask contains no flooded cells."""


class EmptyBoundary(FloodTriageError):
    """Boundary raster contains no cells to sample."""


class TooFewSamples(FloodTriageError):
    """Not enough boundary samples for variogram estimation."""


class FitFailure(FloodTriageError):
    """Variogram optimizer could not produce feasible parameters."""


class SingularSystem(FloodTriageError):
    """Kriging system is singular even after deduplication and jitter."""


class FootprintOutsideRaster(FloodTriageError):
    """Parcel footprint does not overlap the raster extent."""


class BadLambda(FloodTriageError):
    """Confidence decay parameter must be positive."""


class BadCutoff(FloodTriageError):
    """Dispatch cutoff k outside [0, N]."""


class EmptyTruth(FloodTriageError):
    """Ground-truth high-severity set is empty."""


class BadBoundaries(FloodTriageError):
    """Tier boundaries do not satisfy 0 < t2 < t1 < 1."""


class BadSpec(FloodTriageError):
    """Synthetic scenario specification is invalid."""


class ScenarioMismatch(FloodTriageError):
    """Pipeline outputs and truth come from different scenarios."""


class ParseError(FloodTriageError):
    """Malformed input file; message names the offending field or line."""


class FormatMismatch(FloodTriageError):
    """File is not in the expected raster format."""


class GeometryError(FloodTriageError):
    """Invalid polygon geometry for GeoJSON output."""
