"""Georeferenced grid container and local Stage-1 raster operations.

Rasters are immutable-by-convention dense grids with an affine geotransform.
All binary operations require identical geotransforms on both operands; there
is no implicit resampling or broadcasting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import BadKernel, EmptyStack, NonPositiveCell, TransformMismatch


@dataclass(frozen=True)
class GeoTransform:
    """Affine cell-to-map mapping for a north-up grid.

    ``pixel_size_y`` is negative for north-up grids: row index increases
    southward while the map y coordinate decreases.
    """

    origin_x: float
    origin_y: float
    pixel_size_x: float
    pixel_size_y: float
    n_rows: int
    n_cols: int
    crs_label: str = "local"

    def __post_init__(self):
        if self.pixel_size_x <= 0:
            raise ValueError("pixel_size_x must be > 0")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("grid must have at least one row and column")
        if self.pixel_size_y == 0:
            raise ValueError("pixel_size_y must be nonzero")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def cell_area(self) -> float:
        return abs(self.pixel_size_x * self.pixel_size_y)

    def cell_center(self, row, col):
        """Map coordinates of the center of cell (row, col)."""
        x = self.origin_x + (np.asarray(col) + 0.5) * self.pixel_size_x
        y = self.origin_y + (np.asarray(row) + 0.5) * self.pixel_size_y
        return x, y

    def index_of(self, x, y):
        """(row, col) of the cell containing map point (x, y)."""
        col = np.floor((np.asarray(x) - self.origin_x) / self.pixel_size_x).astype(int)
        row = np.floor((np.asarray(y) - self.origin_y) / self.pixel_size_y).astype(int)
        return row, col

    def cell_centers(self):
        """Full grids of cell-center coordinates, shape (n_rows, n_cols)."""
        rows, cols = np.mgrid[0 : self.n_rows, 0 : self.n_cols]
        return self.cell_center(rows, cols)


@dataclass
class Raster:
    """Dense 2-D grid of float, complex, bool, or integer cells."""

    transform: GeoTransform
    cells: np.ndarray
    nodata: Optional[float] = None

    def __post_init__(self):
        self.cells = np.asarray(self.cells)
        if self.cells.shape != self.transform.shape:
            raise ValueError(
                f"cells shape {self.cells.shape} does not match transform "
                f"shape {self.transform.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def nodata_mask(self) -> np.ndarray:
        """Boolean array, True where the cell carries no data."""
        if np.issubdtype(self.cells.dtype, np.floating):
            mask = np.isnan(self.cells)
            if self.nodata is not None and not np.isnan(self.nodata):
                mask |= self.cells == self.nodata
            return mask
        if self.nodata is not None:
            return self.cells == self.nodata
        return np.zeros(self.shape, dtype=bool)

    def valid_values(self) -> np.ndarray:
        return self.cells[~self.nodata_mask()]

    def filled(self, fill=np.nan) -> np.ndarray:
        """Cells as float64 with nodata replaced by ``fill``."""
        out = self.cells.astype(np.float64, copy=True)
        out[self.nodata_mask()] = fill
        return out

    def with_cells(self, cells: np.ndarray, nodata=None) -> "Raster":
        return Raster(self.transform, cells, nodata)

    def copy(self) -> "Raster":
        return Raster(self.transform, self.cells.copy(), self.nodata)


def require_same_transform(*rasters: Raster) -> None:
    first = rasters[0].transform
    for r in rasters[1:]:
        if r.transform != first:
            raise TransformMismatch(
                f"geotransform mismatch: {r.transform} vs {first}"
            )


@dataclass
class RasterStack:
    """Ordered collection of co-registered rasters."""

    layers: Sequence[Raster]

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise EmptyStack("raster stack must hold at least one layer")
        require_same_transform(*self.layers)

    @property
    def transform(self) -> GeoTransform:
        return self.layers[0].transform

    def __len__(self):
        return len(self.layers)

    def __iter__(self) -> Iterable[Raster]:
        return iter(self.layers)


def to_db(linear: Raster) -> Raster:
    """Convert linear-power backscatter to decibels (10*log10)."""
    valid = ~linear.nodata_mask()
    vals = linear.cells
    if np.any(valid & ~(vals > 0)):
        raise NonPositiveCell("linear raster has non-positive cells")
    out = np.full(linear.shape, np.nan)
    out[valid] = 10.0 * np.log10(vals[valid].astype(np.float64))
    return Raster(linear.transform, out)


def from_db(db: Raster) -> Raster:
    """Inverse of :func:`to_db`."""
    valid = ~db.nodata_mask()
    out = np.full(db.shape, np.nan)
    out[valid] = np.power(10.0, db.cells[valid].astype(np.float64) / 10.0)
    return Raster(db.transform, out)


def median_composite(stack: RasterStack) -> Raster:
    """Per-cell median over the stack, ignoring nodata cells.

    A cell is nodata in the result only when it is nodata in every layer.
    """
    data = np.stack([layer.filled() for layer in stack.layers])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN cells
        out = np.nanmedian(data, axis=0)
    return Raster(stack.transform, out)


def _window_stack(values: np.ndarray, kernel: int) -> np.ndarray:
    """Stack of kernel**2 shifted copies with out-of-bounds cells as NaN.

    Emulates an edge-clamped (truncated) moving window.
    """
    half = kernel // 2
    padded = np.pad(values, half, constant_values=np.nan)
    h, w = values.shape
    slabs = []
    for dr in range(kernel):
        for dc in range(kernel):
            slabs.append(padded[dr : dr + h, dc : dc + w])
    return np.stack(slabs)


def lee_sigma_filter(intensity: Raster, kernel: int = 5, sigma_mult: float = 2.0,
                     min_retained: int = 3) -> Raster:
    """Sigma despeckling of a linear-power intensity raster.

    Each output cell is the mean of window cells within ``sigma_mult`` local
    standard deviations of the window mean: cells from a different
    population (e.g. bright dry land in a window centered on open water)
    fall outside the band and are rejected, so edges survive. Windows are
    truncated at raster edges. If fewer than ``min_retained`` cells survive
    the sigma cut, the full-window mean is used instead. Constant regions
    pass through unchanged.
    """
    if kernel % 2 == 0 or kernel < 3:
        raise BadKernel(f"kernel must be odd and >= 3, got {kernel}")
    values = intensity.filled()
    stack = _window_stack(values, kernel)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        local_mean = np.nanmean(stack, axis=0)
        local_std = np.nanstd(stack, axis=0)
        keep = np.abs(stack - local_mean) <= sigma_mult * local_std
        kept = np.where(keep, stack, np.nan)
        sigma_mean = np.nanmean(kept, axis=0)
        n_kept = np.sum(keep & ~np.isnan(stack), axis=0)
    out = np.where(n_kept >= min_retained, sigma_mean, local_mean)
    out[np.isnan(values)] = np.nan
    return Raster(intensity.transform, out)
