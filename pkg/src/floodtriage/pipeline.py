"""End-to-end orchestration of the five pipeline stages over an input bundle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import detect as det
from .depth import (
    DepthField,
    fit_boundary_variogram,
    monte_carlo_depth,
    sample_boundary,
    waterline_boundary,
)
from .raster import Raster, lee_sigma_filter, median_composite, to_db
from .ranking import TierBoundaries, assign_tiers, rank
from .scoring import DamageCurve, default_curve, score_property, zonal_stats
from .synth import ScenarioInputs
from .terrain import compute_hand, d8_flow


@dataclass
class PipelineParams:
    detection: det.DetectionConfig = field(default_factory=det.DetectionConfig)
    speckle_kernel: int = 5
    n_sample: int = 500
    n_mc: int = 100
    dem_sigma_m: float = 0.5
    corr_length_m: float = 250.0
    lambda_m: float = 1.0
    theta_damage_usd: float = 5000.0
    rescale: float = 0.94
    boundaries: TierBoundaries = field(default_factory=TierBoundaries)
    curve_file: Optional[str] = None
    decimation: int = 4
    seed: int = 0


@dataclass
class PipelineResult:
    posterior: Raster
    mask: Raster
    hand: Raster
    depth_field: Optional[DepthField]
    scored: list
    ranked: list
    tiers: list[int]


def detect_stage(inputs: ScenarioInputs, params: PipelineParams):
    """Stages 1-2: composite, despeckle, BCR, CCI, HAND, Bayesian fusion."""
    cfg = params.detection
    pre = median_composite(inputs.pre_stack)
    pre = lee_sigma_filter(pre, params.speckle_kernel)
    post = lee_sigma_filter(inputs.post, params.speckle_kernel)
    bcr = det.compute_bcr(to_db(pre), to_db(post))

    cci = None
    if det.CHANNEL_CCI in cfg.channels_enabled:
        cci = det.compute_cci(inputs.coh_pre, inputs.coh_co, inputs.urban)

    hand = None
    if det.CHANNEL_HAND in cfg.channels_enabled:
        flow = d8_flow(inputs.dem, outlets=inputs.drainage)
        hand = compute_hand(inputs.dem, inputs.drainage, flow)

    reference = inputs.reference.cells.astype(bool)
    model = det.fit_likelihoods(bcr, cci, reference, cfg)
    posterior = det.fuse_posterior(bcr, cci, hand, model, cfg)
    mask = det.extent_mask(posterior, cfg.posterior_threshold)
    if hand is None:
        hand = Raster(inputs.dem.transform, inputs.dem.filled() * 0.0)
    return posterior, mask, hand


def depth_stage(mask: Raster, dem: Raster, permanent_water: Optional[Raster],
                params: PipelineParams) -> DepthField:
    """Stage 3: boundary sampling, variogram fit, kriging, Monte Carlo CIs.

    The detected extent is unioned with permanent water (always wet, and
    dark in both acquisitions so change detection calls it dry) and
    hole-filled: the waterline is the outer perimeter of the wet area, and
    isolated interior miss-cells would otherwise inject below-water
    elevations into the boundary sample and drag the interpolated water
    surface down to the terrain. The wet area is then morphologically
    closed (speckle bites the detected edge into notches whose cells sit
    below the waterline) and dilated by half the despeckle kernel: the
    smoothed edge profile crosses the conservative detection threshold
    inside the true waterline by about that much, so the raw perimeter
    systematically under-reads the water surface elevation. Depth is
    estimated over the whole wet area; permanent water is excluded from the
    boundary sample only.
    """
    from scipy import ndimage

    wet = mask.cells.astype(bool)
    if permanent_water is not None:
        wet = wet | permanent_water.cells.astype(bool)
    eight = np.ones((3, 3), dtype=bool)
    wet = ndimage.binary_closing(wet, eight, iterations=2)
    edge_cells = max(params.speckle_kernel // 2, 0)
    if edge_cells:
        wet = ndimage.binary_dilation(wet, eight, iterations=edge_cells)
    filled_mask = Raster(mask.transform, ndimage.binary_fill_holes(wet))
    boundary = waterline_boundary(filled_mask, permanent_water)
    samples = sample_boundary(boundary, dem, params.n_sample, params.seed)
    model = fit_boundary_variogram(samples)
    return monte_carlo_depth(
        samples, model, dem, filled_mask,
        n_mc=params.n_mc, dem_sigma_m=params.dem_sigma_m,
        corr_length_m=params.corr_length_m, seed=params.seed,
        decimation=params.decimation,
    )


def score_stage(depth_field: DepthField, mask: Raster, parcels,
                params: PipelineParams, curves=None):
    """Stage 4: zonal statistics and severity/confidence/loss per parcel."""
    scored = []
    for prop in parcels:
        stats = zonal_stats(depth_field, mask, prop)
        if curves and (prop.occupancy, prop.stories) in curves:
            curve = curves[(prop.occupancy, prop.stories)]
        else:
            curve = default_curve(prop.stories)
        if params.rescale != curve.rescale:
            curve = DamageCurve(curve.occupancy, curve.stories, curve.knots,
                                params.rescale)
        scored.append(score_property(
            prop, stats, curve,
            theta_damage_usd=params.theta_damage_usd,
            lambda_m=params.lambda_m,
        ))
    return scored


def run_pipeline(inputs: ScenarioInputs, params: PipelineParams,
                 curves=None) -> PipelineResult:
    """Full run: detection, depth, scoring, ranking, tier assignment."""
    posterior, mask, hand = detect_stage(inputs, params)
    depth_field = None
    scored = []
    if mask.cells.any():
        depth_field = depth_stage(mask, inputs.dem, inputs.permanent_water, params)
        scored = score_stage(depth_field, mask, inputs.parcels, params, curves)
    else:
        scored = []
    ranked = rank(scored)
    tiers = assign_tiers(ranked, params.boundaries)
    return PipelineResult(
        posterior=posterior, mask=mask, hand=hand,
        depth_field=depth_field, scored=scored, ranked=ranked, tiers=tiers,
    )
