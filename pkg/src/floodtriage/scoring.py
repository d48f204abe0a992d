"""Stage 4: per-parcel depth statistics, depth-damage evaluation, severity,
confidence, and expected loss."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BadLambda, FootprintOutsideRaster, ParseError
from .depth import DepthField
from .raster import Raster

FAF_FLOOR = 0.10  # below the flood detection resolution limit -> severity 0

# Single-family residential curve anchors: EFL rises steeply to 1 m,
# flattens to 2 m, saturates above 3 m. Event rescale default 0.94.
RES1_KNOTS = ((0.0, 0.0), (1.0, 0.35), (2.0, 0.55), (3.0, 0.72))
DEFAULT_RESCALE = 0.94
TWO_STORY_SCALE = 0.85  # placeholder modifier; override via curve file


@dataclass
class Property:
    claim_id: str
    parcel_id: str
    centroid: tuple[float, float]  # (lat, lon)
    footprint: Sequence[tuple[float, float]]  # closed or open ring, map coords
    occupancy: str = "RES1"
    stories: int = 1
    insured_value_usd: float = 1.0

    def __post_init__(self):
        if self.insured_value_usd <= 0:
            raise ValueError("insured_value_usd must be > 0")
        if self.stories < 1:
            raise ValueError("stories must be >= 1")
        ring = [tuple(map(float, p)) for p in self.footprint]
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]
        if len(ring) < 3:
            raise ValueError("footprint ring needs >= 3 distinct vertices")
        self.footprint = ring


@dataclass
class DepthStats:
    d_max_m: float  # 90th percentile footprint depth
    d_mean_m: float
    faf: float
    dur_m: float  # mean CI half-width over footprint cells


@dataclass
class DamageCurve:
    """Piecewise-linear depth to expected-fractional-loss curve."""

    occupancy: str = "RES1"
    stories: int = 1
    knots: Sequence[tuple[float, float]] = RES1_KNOTS
    rescale: float = DEFAULT_RESCALE

    def __post_init__(self):
        knots = [(float(d), float(e)) for d, e in self.knots]
        if knots != sorted(knots):
            raise ValueError("knots must be sorted by depth")
        efls = [e for _, e in knots]
        if any(b < a for a, b in zip(efls, efls[1:])):
            raise ValueError("efl must be nondecreasing")
        if not all(0.0 <= e <= 1.0 for e in efls):
            raise ValueError("efl must be in [0,1]")
        if not (0.0 < self.rescale <= 1.2):
            raise ValueError("rescale must be in (0, 1.2]")
        self.knots = knots


@dataclass
class ScoredProperty:
    property: Property
    stats: DepthStats
    severity: float
    confidence: float
    expected_loss_usd: float
    high_severity: bool


def default_curve(stories: int = 1) -> DamageCurve:
    if stories >= 2:
        knots = tuple((d, e * TWO_STORY_SCALE) for d, e in RES1_KNOTS)
        return DamageCurve(stories=stories, knots=knots)
    return DamageCurve(stories=stories)


def load_curves(path) -> dict[tuple[str, int], DamageCurve]:
    """Load damage curves from a knot table.

    Lines are ``occupancy stories depth efl``; blank lines and ``#`` comments
    are ignored. Knots for the same (occupancy, stories) pair accumulate.
    """
    groups: dict[tuple[str, int], list[tuple[float, float]]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"line {lineno}: expected 4 fields, got {len(parts)}")
            try:
                occ, stories, d, e = parts[0], int(parts[1]), float(parts[2]), float(parts[3])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            groups.setdefault((occ, stories), []).append((d, e))
    return {
        key: DamageCurve(occupancy=key[0], stories=key[1], knots=sorted(knots))
        for key, knots in groups.items()
    }


def points_in_polygon(xs: np.ndarray, ys: np.ndarray,
                      ring: Sequence[tuple[float, float]]) -> np.ndarray:
    """Even-odd ray-casting point-in-polygon test, vectorized over points."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        crosses = (y1 > ys) != (y2 > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (xs < x_int)
    return inside


def zonal_stats(field: DepthField, mask: Raster, prop: Property,
                percentile: float = 90.0) -> DepthStats:
    """Depth statistics over the raster cells whose centers fall in the
    footprint. Dry member cells contribute depth 0; with zero member cells
    all statistics are 0."""
    tr = field.depth.transform
    ring = prop.footprint
    rx = [p[0] for p in ring]
    ry = [p[1] for p in ring]
    x0, x1 = tr.origin_x, tr.origin_x + tr.n_cols * tr.pixel_size_x
    ylo = min(tr.origin_y, tr.origin_y + tr.n_rows * tr.pixel_size_y)
    yhi = max(tr.origin_y, tr.origin_y + tr.n_rows * tr.pixel_size_y)
    if max(rx) < x0 or min(rx) > x1 or max(ry) < ylo or min(ry) > yhi:
        raise FootprintOutsideRaster(f"footprint of {prop.parcel_id} outside raster")

    xs, ys = tr.cell_centers()
    member = points_in_polygon(xs.ravel(), ys.ravel(), ring).reshape(tr.shape)
    n_member = int(member.sum())
    if n_member == 0:
        return DepthStats(0.0, 0.0, 0.0, 0.0)

    flooded = mask.cells.astype(bool) & member
    depth_vals = field.depth.filled()
    member_depths = np.where(np.isnan(depth_vals), 0.0, depth_vals)[member]
    d_max = float(np.percentile(member_depths, percentile))
    d_mean = float(member_depths.mean())
    faf = float(flooded.sum()) / n_member
    if flooded.any():
        half = field.ci_half_width().filled()[flooded]
        dur = float(np.nanmean(half)) if not np.all(np.isnan(half)) else 0.0
    else:
        dur = 0.0
    return DepthStats(d_max, d_mean, faf, dur)


def ddc_eval(curve: DamageCurve, depth_m: float) -> float:
    """Rescaled piecewise-linear EFL at the given depth (clamped past the
    last knot)."""
    if depth_m < 0:
        raise ValueError("depth must be >= 0")
    ds = [d for d, _ in curve.knots]
    es = [e for _, e in curve.knots]
    return float(np.interp(depth_m, ds, es)) * curve.rescale


def confidence(faf: float, dur_m: float, lambda_m: float = 1.0) -> float:
    """Confidence = FAF * exp(-DUR/lambda)."""
    if lambda_m <= 0:
        raise BadLambda("lambda must be > 0")
    if not (0.0 <= faf <= 1.0):
        raise ValueError("faf must be in [0,1]")
    if dur_m < 0:
        raise ValueError("dur must be >= 0")
    return faf * float(np.exp(-dur_m / lambda_m))


def score_property(prop: Property, stats: DepthStats, curve: DamageCurve,
                   theta_damage_usd: float = 5000.0,
                   lambda_m: float = 1.0) -> ScoredProperty:
    """Severity, confidence, and expected loss for one property."""
    if stats.faf < FAF_FLOOR:
        s = 0.0
    else:
        s = ddc_eval(curve, stats.d_max_m)
    c = confidence(stats.faf, stats.dur_m, lambda_m)
    loss = s * prop.insured_value_usd
    return ScoredProperty(
        property=prop,
        stats=stats,
        severity=s,
        confidence=c,
        expected_loss_usd=loss,
        high_severity=loss >= theta_damage_usd,
    )
