"""Stage 3: binary extent mask to a continuous depth field with 90% CIs.

Boundary cells of the flood mask are sampled for their DEM elevation, a
spherical variogram is fit, ordinary kriging interpolates the water surface
inward, and DEM vertical uncertainty is propagated through Monte Carlo
perturbation. The zone-mean waterline method is kept as a baseline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import gaussian_filter

from .errors import EmptyBoundary, EmptyMask, TooFewSamples
from .geostat import VariogramModel, empirical_semivariogram, fit_spherical, krige_predict
from .raster import Raster, require_same_transform

DEPTH_MAX_M = 10.0  # physical clip for flood depth

_EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass
class BoundarySamples:
    """Flood-boundary elevation samples: coords in map units, elevations in m."""

    coords: np.ndarray  # (n, 2) x,y
    elevations: np.ndarray  # (n,)
    dem_label: str = "dem"

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.elevations = np.asarray(self.elevations, dtype=np.float64)
        if len(self.elevations) < 3:
            raise TooFewSamples(
                f"need >= 3 boundary samples, got {len(self.elevations)}"
            )

    def __len__(self):
        return len(self.elevations)


@dataclass
class DepthField:
    """Depth estimate with per-cell 90% CI bounds and kriging variance."""

    depth: Raster
    ci_low: Raster
    ci_high: Raster
    kriging_variance: Raster

    def ci_half_width(self) -> Raster:
        half = (self.ci_high.filled() - self.ci_low.filled()) / 2.0
        return Raster(self.depth.transform, half)


def extract_boundary(mask: Raster, permanent_water: Raster | None = None) -> Raster:
    """Outer perimeter of the flood mask under 8-connectivity.

    A flooded cell is boundary when it has at least one non-flooded
    8-neighbor (out-of-domain counts as dry). Cells whose only dry neighbors
    are permanent water are excluded, as are permanent-water cells.
    """
    flooded = mask.cells.astype(bool)
    if not flooded.any():
        raise EmptyMask("no flooded cells in mask")
    dry = ~flooded
    # pad so domain edges count as dry
    dry_pad = np.pad(dry, 1, constant_values=True)
    has_dry_neighbor = ndimage.binary_dilation(dry_pad, _EIGHT_CONN)[1:-1, 1:-1]
    boundary = flooded & has_dry_neighbor
    if permanent_water is not None:
        require_same_transform(mask, permanent_water)
        perm = permanent_water.cells.astype(bool)
        # a dry neighbor that is not permanent water must exist
        dry_land_pad = np.pad(dry & ~perm, 1, constant_values=True)
        has_land_neighbor = ndimage.binary_dilation(dry_land_pad, _EIGHT_CONN)[1:-1, 1:-1]
        boundary &= has_land_neighbor & ~perm
    return Raster(mask.transform, boundary)


def waterline_boundary(mask: Raster, permanent_water: Raster | None = None) -> Raster:
    """Boundary cells that sit on an actual waterline.

    Stricter than ``extract_boundary``: the dry neighbor must be in-bounds
    dry land. Flood extents truncated by the scene edge would otherwise
    contribute deep underwater cells whose elevation says nothing about the
    water surface.
    """
    flooded = mask.cells.astype(bool)
    if not flooded.any():
        raise EmptyMask("no flooded cells in mask")
    dry_land = ~flooded
    if permanent_water is not None:
        require_same_transform(mask, permanent_water)
        perm = permanent_water.cells.astype(bool)
        dry_land = dry_land & ~perm
        flooded = flooded & ~perm
    # border_value=0: out-of-domain is neither wet nor dry land
    has_land_neighbor = ndimage.binary_dilation(dry_land, _EIGHT_CONN,
                                                border_value=0)
    return Raster(mask.transform, flooded & has_land_neighbor)


def sample_boundary(boundary: Raster, dem: Raster, n: int = 500,
                    seed: int = 0) -> BoundarySamples:
    """Stratified draw of up to n boundary cells, deterministic per seed.

    With at most n boundary cells all are taken. Otherwise the bounding box
    is split into ceil(sqrt(n))^2 tiles and occupied tiles are drawn from in
    round-robin order until n samples are collected, without duplicates.
    """
    require_same_transform(boundary, dem)
    cells = np.argwhere(boundary.cells.astype(bool))
    if len(cells) == 0:
        raise EmptyBoundary("boundary raster is empty")
    if len(cells) > n:
        rng = np.random.default_rng(seed)
        k = math.ceil(math.sqrt(n))
        r0, c0 = cells.min(axis=0)
        r1, c1 = cells.max(axis=0)
        tile_r = np.minimum(((cells[:, 0] - r0) * k) // max(r1 - r0 + 1, 1), k - 1)
        tile_c = np.minimum(((cells[:, 1] - c0) * k) // max(c1 - c0 + 1, 1), k - 1)
        tile_id = tile_r * k + tile_c
        order = np.argsort(tile_id, kind="stable")
        cells_sorted = cells[order]
        tile_sorted = tile_id[order]
        # per-tile shuffled queues, visited round-robin
        queues = []
        for tid in np.unique(tile_sorted):
            members = cells_sorted[tile_sorted == tid]
            members = members[rng.permutation(len(members))]
            queues.append(list(map(tuple, members)))
        chosen = []
        while len(chosen) < n:
            progressed = False
            for q in queues:
                if q and len(chosen) < n:
                    chosen.append(q.pop())
                    progressed = True
            if not progressed:
                break
        cells = np.array(chosen)
    rows, cols = cells[:, 0], cells[:, 1]
    x, y = boundary.transform.cell_center(rows, cols)
    z = dem.filled()[rows, cols]
    ok = ~np.isnan(z)
    return BoundarySamples(np.column_stack([x[ok], y[ok]]), z[ok])


def fit_boundary_variogram(samples: BoundarySamples, n_bins: int = 12) -> VariogramModel:
    bins = empirical_semivariogram(samples.coords, samples.elevations, n_bins)
    return fit_spherical(bins)


def krige_wse_grid(samples: BoundarySamples, model: VariogramModel, dem: Raster,
                   mask: Raster, decimation: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Kriged water-surface elevation and variance over the full grid.

    The kriging system is solved on a decimated target grid covering the
    flood bounding box and bilinearly densified to every cell; the dense
    target set is a runtime shortcut, not part of the estimator.
    """
    tr = dem.transform
    flooded = mask.cells.astype(bool)
    if not flooded.any():
        raise EmptyMask("no flooded cells in mask")
    rows_any = np.flatnonzero(flooded.any(axis=1))
    cols_any = np.flatnonzero(flooded.any(axis=0))
    r_lo, r_hi = rows_any[0], rows_any[-1]
    c_lo, c_hi = cols_any[0], cols_any[-1]
    tgt_rows = np.unique(np.append(np.arange(r_lo, r_hi + 1, decimation), r_hi))
    tgt_cols = np.unique(np.append(np.arange(c_lo, c_hi + 1, decimation), c_hi))
    rr, cc = np.meshgrid(tgt_rows, tgt_cols, indexing="ij")
    tx, ty = tr.cell_center(rr.ravel(), cc.ravel())
    targets = np.column_stack([tx, ty])
    dedup = 0.5 * min(tr.pixel_size_x, abs(tr.pixel_size_y))
    pred, var = krige_predict(samples.coords, samples.elevations, model,
                              targets, dedup_distance=dedup)
    pred_grid = pred.reshape(rr.shape)
    var_grid = var.reshape(rr.shape)

    wse = np.full(tr.shape, np.nan)
    kvar = np.full(tr.shape, np.nan)
    if len(tgt_rows) >= 2 and len(tgt_cols) >= 2:
        all_r = np.arange(r_lo, r_hi + 1)
        all_c = np.arange(c_lo, c_hi + 1)
        pts_r, pts_c = np.meshgrid(all_r, all_c, indexing="ij")
        pts = np.column_stack([pts_r.ravel(), pts_c.ravel()]).astype(float)
        interp_p = RegularGridInterpolator((tgt_rows, tgt_cols), pred_grid)
        interp_v = RegularGridInterpolator((tgt_rows, tgt_cols), var_grid)
        wse[r_lo : r_hi + 1, c_lo : c_hi + 1] = interp_p(pts).reshape(pts_r.shape)
        kvar[r_lo : r_hi + 1, c_lo : c_hi + 1] = interp_v(pts).reshape(pts_r.shape)
    else:
        wse[rr, cc] = pred_grid
        kvar[rr, cc] = var_grid
    return wse, kvar


def depth_from_wse(wse: Raster, dem: Raster, mask: Raster) -> Raster:
    """Depth = clamp(WSE - DEM, 0, 10) on flooded cells, nodata elsewhere."""
    require_same_transform(wse, dem, mask)
    flooded = mask.cells.astype(bool)
    depth = np.clip(wse.filled() - dem.filled(), 0.0, DEPTH_MAX_M)
    depth[~flooded] = np.nan
    return Raster(dem.transform, depth)


def label_zones(mask: Raster) -> Raster:
    """8-connected component labels of the flood mask (0 = background)."""
    labels, _ = ndimage.label(mask.cells.astype(bool), structure=_EIGHT_CONN)
    return Raster(mask.transform, labels)


def zone_mean_depth(mask: Raster, dem: Raster, zones: Raster) -> Raster:
    """Baseline waterline method: zone-constant WSE = mean boundary elevation."""
    require_same_transform(mask, dem, zones)
    labels = zones.cells
    dem_vals = dem.filled()
    depth = np.full(mask.transform.shape, np.nan)
    boundary = extract_boundary(mask).cells
    for zone_id in np.unique(labels):
        if zone_id == 0:
            continue
        zone_cells = labels == zone_id
        zb = zone_cells & boundary
        if not zb.any():
            warnings.warn(f"zone {zone_id} has no boundary cells; skipped")
            continue
        wse = np.nanmean(dem_vals[zb])
        d = np.clip(wse - dem_vals[zone_cells], 0.0, DEPTH_MAX_M)
        depth[zone_cells] = d
    return Raster(mask.transform, depth)


def correlated_noise(shape: tuple[int, int], sigma_m: float, corr_cells: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Gaussian random field with the target pointwise std.

    White noise smoothed by a Gaussian kernel of the given correlation
    length (in cells), rescaled so the field std equals sigma_m.
    """
    if sigma_m <= 0:
        return np.zeros(shape)
    white = rng.standard_normal(shape)
    if corr_cells > 0:
        field = gaussian_filter(white, sigma=corr_cells, mode="reflect")
    else:
        field = white
    std = field.std()
    if std <= 0:
        return np.zeros(shape)
    return field * (sigma_m / std)


def monte_carlo_depth(samples: BoundarySamples, model: VariogramModel,
                      dem: Raster, mask: Raster, n_mc: int = 100,
                      dem_sigma_m: float = 0.5, corr_length_m: float = 250.0,
                      seed: int = 0, decimation: int = 4) -> DepthField:
    """Depth field with 90% CIs from Monte Carlo DEM perturbation.

    Each realization perturbs the DEM with a spatially correlated Gaussian
    field, re-samples boundary elevations at the fixed sample locations,
    re-kriges the water surface, and recomputes depth. The reported depth is
    the per-cell median realization; ci_low/ci_high are the 5th and 95th
    percentiles. With dem_sigma_m = 0 the field is deterministic.
    """
    if n_mc < 2:
        raise ValueError("n_mc must be >= 2")
    if dem_sigma_m < 0:
        raise ValueError("dem_sigma_m must be >= 0")
    tr = dem.transform
    flooded = mask.cells.astype(bool)
    corr_cells = corr_length_m / tr.pixel_size_x
    rows, cols = tr.index_of(samples.coords[:, 0], samples.coords[:, 1])
    rows = np.clip(rows, 0, tr.n_rows - 1)
    cols = np.clip(cols, 0, tr.n_cols - 1)
    dem_vals = dem.filled()

    # deterministic kriging variance on the unperturbed DEM
    _, kvar = krige_wse_grid(samples, model, dem, mask, decimation)
    kvar[~flooded] = np.nan

    master = np.random.default_rng(seed)
    realization_seeds = master.integers(0, 2**63 - 1, size=n_mc)
    stack = np.empty((n_mc, tr.n_rows, tr.n_cols))
    for i in range(n_mc):
        rng = np.random.default_rng(realization_seeds[i])
        noise = correlated_noise(tr.shape, dem_sigma_m, corr_cells, rng)
        dem_r = Raster(tr, dem_vals + noise)
        z_r = dem_r.cells[rows, cols]
        samples_r = BoundarySamples(samples.coords, z_r, samples.dem_label)
        wse_r, _ = krige_wse_grid(samples_r, model, dem_r, mask, decimation)
        # depth differencing stays on the unperturbed DEM: the perturbation
        # propagates vertical error through the boundary/WSE stage, and
        # differencing against the same perturbed surface would cancel it
        d = np.clip(wse_r - dem_vals, 0.0, DEPTH_MAX_M)
        d[~flooded] = np.nan
        stack[i] = d

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        depth = np.nanmedian(stack, axis=0)
        ci_low = np.nanpercentile(stack, 5.0, axis=0)
        ci_high = np.nanpercentile(stack, 95.0, axis=0)
    return DepthField(
        depth=Raster(tr, depth),
        ci_low=Raster(tr, ci_low),
        ci_high=Raster(tr, ci_high),
        kriging_variance=Raster(tr, kvar),
    )
