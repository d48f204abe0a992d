"""SAR-based flood detection, depth estimation, and insurance claims triage.

The pipeline runs in five stages: raster preprocessing (compositing,
despeckling, dB conversion), flood-extent detection (backscatter change,
coherence change, terrain gating, Bayesian fusion), depth estimation
(boundary kriging with Monte Carlo confidence intervals), per-property
scoring (depth-damage curves, severity, confidence, expected loss), and
ranking with triage-tier assignment and evaluation metrics.
"""

from .config import PipelineConfig, read_config, write_config
from .depth import (
    BoundarySamples,
    DepthField,
    extract_boundary,
    monte_carlo_depth,
    sample_boundary,
)
from .detect import (
    DetectionConfig,
    LikelihoodModel,
    coherence,
    compute_bcr,
    compute_cci,
    extent_mask,
    fit_likelihoods,
    fuse_posterior,
    scene_threshold,
)
from .errors import FloodTriageError
from .geostat import VariogramModel, empirical_semivariogram, fit_spherical, krige_predict
from .pipeline import PipelineParams, PipelineResult, run_pipeline
from .raster import GeoTransform, Raster, RasterStack, lee_sigma_filter, median_composite
from .ranking import (
    TierBoundaries,
    TriageMetrics,
    assign_tiers,
    auirc,
    evaluate_triage,
    extent_metrics,
    irr,
    irr_at_recall,
    k_at_recall,
    rank,
    recall_dfdr,
    tes,
)
from .raster_io import read_raster, write_raster
from .scoring import (
    DamageCurve,
    DepthStats,
    Property,
    ScoredProperty,
    confidence,
    ddc_eval,
    default_curve,
    score_property,
    zonal_stats,
)
from .synth import ScenarioInputs, ScenarioSpec, ScenarioTruth, generate, oracle_metrics
from .terrain import compute_hand, d8_flow, hand_gate, priority_flood_fill

__version__ = "0.1.0"

__all__ = [
    "BoundarySamples",
    "DamageCurve",
    "DepthField",
    "DepthStats",
    "DetectionConfig",
    "FloodTriageError",
    "GeoTransform",
    "LikelihoodModel",
    "PipelineConfig",
    "PipelineParams",
    "PipelineResult",
    "Property",
    "Raster",
    "RasterStack",
    "ScenarioInputs",
    "ScenarioSpec",
    "ScenarioTruth",
    "ScoredProperty",
    "TierBoundaries",
    "TriageMetrics",
    "VariogramModel",
    "assign_tiers",
    "auirc",
    "coherence",
    "compute_bcr",
    "compute_cci",
    "compute_hand",
    "confidence",
    "d8_flow",
    "ddc_eval",
    "default_curve",
    "empirical_semivariogram",
    "evaluate_triage",
    "extent_mask",
    "extent_metrics",
    "extract_boundary",
    "fit_likelihoods",
    "fit_spherical",
    "fuse_posterior",
    "generate",
    "hand_gate",
    "irr",
    "irr_at_recall",
    "k_at_recall",
    "krige_predict",
    "lee_sigma_filter",
    "median_composite",
    "monte_carlo_depth",
    "oracle_metrics",
    "priority_flood_fill",
    "rank",
    "read_config",
    "read_raster",
    "recall_dfdr",
    "run_pipeline",
    "sample_boundary",
    "scene_threshold",
    "score_property",
    "tes",
    "write_config",
    "write_raster",
    "zonal_stats",
]
