"""Fully known synthetic flood scenarios for end-to-end testing.

A scenario bundles everything the pipeline consumes (DEM, SAR intensity
pair, coherence pair, masks, parcels) together with its exact ground truth
(flood mask, depth, per-property severity and loss), all deterministic from
the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BadSpec, ScenarioMismatch
from .raster import GeoTransform, Raster, RasterStack
from .ranking import evaluate_triage, extent_metrics
from .scoring import Property, ddc_eval, default_curve, points_in_polygon

TERRAIN_KINDS = ("tilted", "bowl", "valley", "composite")
WSE_KINDS = ("constant", "planar")

_DRY_INTENSITY = 0.15  # linear sigma0 of dry land (~ -8.2 dB)
_WATER_INTENSITY = 0.02  # permanent water, dark in both acquisitions
_URBAN_BRIGHT_FACTOR = 1.5  # double-bounce: flooded urban brightens


@dataclass
class ScenarioSpec:
    n_rows: int = 128
    n_cols: int = 128
    cell_size_m: float = 10.0
    terrain: str = "tilted"
    wse_kind: str = "constant"
    wse_quantile: float = 0.35  # flood stage as a DEM quantile
    wse_offset_m: float = 0.3
    wse_gradient_per_km: float = 0.5  # planar WSE slope along x
    looks: int = 5
    urban_fraction: float = 0.0
    n_pre_layers: int = 3
    parcel_grid: tuple[int, int] = (12, 12)
    parcel_cells: float = 3.0  # footprint edge length, in cells
    value_log_mean: float = float(np.log(200_000.0))
    value_log_sigma: float = 0.4
    theta_damage_usd: float = 5000.0
    dem_noise_sigma_m: float = 0.0  # observed-DEM vertical error
    dem_noise_corr_m: float = 250.0
    sar_date: str = "2017-08-30"
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 8 or self.n_cols < 8:
            raise BadSpec("grid dims must be >= 8")
        if self.looks < 1:
            raise BadSpec("speckle looks must be >= 1")
        if self.terrain not in TERRAIN_KINDS:
            raise BadSpec(f"unknown terrain {self.terrain!r}")
        if self.wse_kind not in WSE_KINDS:
            raise BadSpec(f"unknown wse kind {self.wse_kind!r}")
        if self.seed is None:
            raise BadSpec("seed is mandatory")


@dataclass
class ScenarioInputs:
    """Everything the pipeline consumes, co-registered on one transform."""

    dem: Raster  # observed DEM (true DEM plus optional vertical error)
    pre_stack: RasterStack  # linear-power intensity acquisitions
    post: Raster  # co-event linear-power intensity
    coh_pre: Raster
    coh_co: Raster
    urban: Raster
    drainage: Raster
    permanent_water: Raster
    reference: Raster  # scene-statistics reference region
    parcels: list[Property]
    sar_date: str


@dataclass
class ScenarioTruth:
    mask: Raster  # true flood extent
    depth: Raster  # true depth (m) on flooded cells, NaN elsewhere
    true_dem: Raster
    true_wse: np.ndarray
    properties: list[dict]  # claim_id, depth, severity, loss, high_severity

    def high_severity_ids(self) -> set[str]:
        return {p["claim_id"] for p in self.properties if p["high_severity"]}


def _terrain(spec: ScenarioSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    width = spec.n_cols * spec.cell_size_m
    height = spec.n_rows * spec.cell_size_m
    if spec.terrain == "tilted":
        return 20.0 + 0.004 * x
    if spec.terrain == "bowl":
        cx, cy = width / 2.0, -height / 2.0
        r = np.hypot(x - cx, y - cy)
        rmax = np.hypot(cx, cy)
        return 2.0 + 12.0 * (r / rmax) ** 2
    if spec.terrain == "valley":
        return 2.0 + 0.02 * np.abs(x - width / 2.0) + 0.001 * (-y)
    # composite: tilted plain plus a tall narrow ridge near the high side
    base = 20.0 + 0.004 * x
    ridge_x = 0.75 * width
    ridge = 16.0 * np.exp(-(((x - ridge_x) / (0.06 * width)) ** 2))
    return base + ridge


def _true_wse(spec: ScenarioSpec, dem: np.ndarray, x: np.ndarray) -> np.ndarray:
    stage = np.quantile(dem, spec.wse_quantile) + spec.wse_offset_m
    if spec.wse_kind == "constant":
        return np.full(dem.shape, stage)
    return stage + spec.wse_gradient_per_km * (x - x.min()) / 1000.0


def _speckled(rng: np.random.Generator, mean_map: np.ndarray, looks: int) -> np.ndarray:
    return mean_map * rng.gamma(shape=looks, scale=1.0 / looks, size=mean_map.shape)


def generate(spec: ScenarioSpec) -> tuple[ScenarioInputs, ScenarioTruth]:
    """Build a deterministic scenario and its exact ground truth."""
    rng = np.random.default_rng(spec.seed)
    tr = GeoTransform(
        origin_x=0.0, origin_y=0.0,
        pixel_size_x=spec.cell_size_m, pixel_size_y=-spec.cell_size_m,
        n_rows=spec.n_rows, n_cols=spec.n_cols, crs_label="synthetic/utm-like",
    )
    x, y = tr.cell_centers()
    true_dem = _terrain(spec, x, y)
    wse = _true_wse(spec, true_dem, x)
    flooded = wse > true_dem
    truth_depth = np.where(flooded, np.clip(wse - true_dem, 0.0, 10.0), np.nan)

    # low-lying always-water cells double as the drainage network proxy
    perm = true_dem <= np.quantile(true_dem, 0.02)
    drainage = perm.copy()

    # urban block: lower-left quarter scaled to the requested fraction
    urban = np.zeros(tr.shape, dtype=bool)
    frac = 0.25 if spec.terrain == "composite" and spec.urban_fraction == 0.0 \
        else spec.urban_fraction
    if frac > 0:
        ur = int(round(spec.n_rows * np.sqrt(frac)))
        uc = int(round(spec.n_cols * np.sqrt(frac)))
        urban[spec.n_rows - ur :, :uc] = True

    # false-positive ridge crest: dry, elevated, but with a flood-like
    # backscatter drop (composite terrain only)
    ridge_fp = np.zeros(tr.shape, dtype=bool)
    if spec.terrain == "composite":
        base = 20.0 + 0.004 * x
        ridge_fp = (true_dem - base > 12.0) & ~flooded

    drop_db = rng.uniform(3.5, 7.5)
    drop_factor = 10.0 ** (-drop_db / 10.0)

    pre_mean = np.full(tr.shape, _DRY_INTENSITY)
    pre_mean[perm] = _WATER_INTENSITY
    post_mean = pre_mean.copy()
    open_flood = flooded & ~urban & ~perm
    post_mean[open_flood] = _DRY_INTENSITY * drop_factor
    post_mean[flooded & urban & ~perm] = _DRY_INTENSITY * _URBAN_BRIGHT_FACTOR
    post_mean[ridge_fp] = _DRY_INTENSITY * drop_factor

    pre_layers = [
        Raster(tr, _speckled(rng, pre_mean, spec.looks))
        for _ in range(spec.n_pre_layers)
    ]
    post = Raster(tr, _speckled(rng, post_mean, spec.looks))

    coh_pre_vals = np.clip(0.85 + 0.03 * rng.standard_normal(tr.shape), 0.0, 1.0)
    decrement = np.zeros(tr.shape)
    urban_flood = flooded & urban & ~perm
    decrement[urban_flood] = rng.uniform(0.35, 0.65, size=int(urban_flood.sum()))
    decrement[open_flood] = 0.5
    # agricultural decorrelation outside the urban mask (vegetation, tillage)
    agri = (~urban) & (~flooded) & (rng.random(tr.shape) < 0.05)
    decrement[agri] = 0.4
    coh_co_vals = np.clip(
        coh_pre_vals - decrement + 0.02 * rng.standard_normal(tr.shape), 0.0, 1.0
    )

    # scene-statistics reference: dry, off-ridge land. Dry urban stays in so
    # the coherence-change channel gets its non-flood statistics.
    reference = (~flooded) & (~perm) & (~ridge_fp) & ~agri

    dem_obs = true_dem.copy()
    if spec.dem_noise_sigma_m > 0:
        from .depth import correlated_noise

        dem_obs = dem_obs + correlated_noise(
            tr.shape, spec.dem_noise_sigma_m,
            spec.dem_noise_corr_m / spec.cell_size_m, rng,
        )

    parcels = _make_parcels(spec, tr, rng)
    truth_rows = _truth_properties(spec, tr, parcels, flooded, truth_depth)

    inputs = ScenarioInputs(
        dem=Raster(tr, dem_obs),
        pre_stack=RasterStack(pre_layers),
        post=post,
        coh_pre=Raster(tr, coh_pre_vals),
        coh_co=Raster(tr, coh_co_vals),
        urban=Raster(tr, urban),
        drainage=Raster(tr, drainage),
        permanent_water=Raster(tr, perm),
        reference=Raster(tr, reference),
        parcels=parcels,
        sar_date=spec.sar_date,
    )
    truth = ScenarioTruth(
        mask=Raster(tr, flooded),
        depth=Raster(tr, truth_depth),
        true_dem=Raster(tr, true_dem),
        true_wse=wse,
        properties=truth_rows,
    )
    return inputs, truth


def _make_parcels(spec: ScenarioSpec, tr: GeoTransform,
                  rng: np.random.Generator) -> list[Property]:
    pr, pc = spec.parcel_grid
    edge = spec.parcel_cells * spec.cell_size_m
    width = spec.n_cols * spec.cell_size_m
    height = spec.n_rows * spec.cell_size_m
    margin = 2.0 * spec.cell_size_m
    xs = np.linspace(margin, width - margin - edge, pc)
    ys = np.linspace(-margin - edge, -(height - margin), pr)
    parcels = []
    idx = 0
    for yy in ys:
        for xx in xs:
            # offset by a third of a cell so footprint edges avoid centers
            x0 = xx + spec.cell_size_m / 3.0
            y0 = yy - spec.cell_size_m / 3.0
            ring = [(x0, y0), (x0 + edge, y0), (x0 + edge, y0 - edge), (x0, y0 - edge)]
            stories = int(rng.choice([1, 2], p=[0.7, 0.3]))
            value = float(rng.lognormal(spec.value_log_mean, spec.value_log_sigma))
            cx, cy = x0 + edge / 2.0, y0 - edge / 2.0
            parcels.append(Property(
                claim_id=f"CLM{idx:05d}",
                parcel_id=f"P{idx:05d}",
                centroid=(cy, cx),  # (lat, lon) passthrough in map units
                footprint=ring,
                occupancy="RES1",
                stories=stories,
                insured_value_usd=value,
            ))
            idx += 1
    return parcels


def _truth_properties(spec: ScenarioSpec, tr: GeoTransform,
                      parcels: Sequence[Property], flooded: np.ndarray,
                      truth_depth: np.ndarray) -> list[dict]:
    xs, ys = tr.cell_centers()
    xf, yf = xs.ravel(), ys.ravel()
    depth0 = np.where(np.isnan(truth_depth), 0.0, truth_depth).ravel()
    flooded_flat = flooded.ravel()
    rows = []
    for prop in parcels:
        member = points_in_polygon(xf, yf, prop.footprint)
        if member.any():
            d_max = float(np.percentile(depth0[member], 90.0))
            faf = float(flooded_flat[member].mean())
        else:
            d_max, faf = 0.0, 0.0
        curve = default_curve(prop.stories)
        severity = ddc_eval(curve, d_max)
        loss = severity * prop.insured_value_usd
        rows.append({
            "claim_id": prop.claim_id,
            "parcel_id": prop.parcel_id,
            "depth": d_max,
            "faf": faf,
            "severity": severity,
            "loss": loss,
            "high_severity": loss >= spec.theta_damage_usd,
        })
    return rows


def oracle_metrics(pred_mask: Raster, pred_depth: Optional[Raster],
                   ranked, truth: ScenarioTruth,
                   recall_levels=(0.90, 0.95)) -> dict:
    """Score pipeline outputs against scenario ground truth.

    Returns extent metrics, depth RMSE/MAE/R2 over true flooded cells
    (missing predictions count as depth 0), and triage metrics when a
    ranked list is supplied.
    """
    if pred_mask.transform != truth.mask.transform:
        raise ScenarioMismatch("prediction and truth grids differ")
    report = {"extent": extent_metrics(pred_mask, truth.mask)}

    if pred_depth is not None:
        if pred_depth.transform != truth.mask.transform:
            raise ScenarioMismatch("depth and truth grids differ")
        t = truth.mask.cells.astype(bool)
        d_true = truth.depth.filled()[t]
        d_pred = pred_depth.filled()[t]
        d_pred = np.where(np.isnan(d_pred), 0.0, d_pred)
        err = d_pred - d_true
        rmse = float(np.sqrt(np.mean(err**2)))
        mae = float(np.mean(np.abs(err)))
        ss_res = float(np.sum(err**2))
        ss_tot = float(np.sum((d_true - d_true.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
        report["depth"] = {"rmse_m": rmse, "mae_m": mae, "r2": r2}

    if ranked is not None:
        truth_ids = truth.high_severity_ids()
        if truth_ids:
            metrics = evaluate_triage(ranked, truth_ids, recall_levels)
            report["triage"] = {
                "irr_at_recall": metrics.irr_at_recall,
                "tes": metrics.tes,
                "auirc": metrics.auirc,
            }
        else:
            report["triage"] = {"error": "EmptyTruth"}
    return report
