"""Stage-5 output products: per-property CSV, GeoJSON, and event summary."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import GeometryError
from .ranking import TierBoundaries, irr_at_recall
from .scoring import ScoredProperty

# Column set and order are a wire contract; do not reorder.
CSV_COLUMNS = (
    "claim_id", "parcel_id", "latitude", "longitude", "severity_score",
    "confidence", "depth_max_m", "depth_mean_m", "depth_unc_m", "faf",
    "expected_loss", "tier", "occupancy", "stories", "sar_date",
)


@dataclass
class OutputRow:
    claim_id: str
    parcel_id: str
    latitude: float
    longitude: float
    severity_score: float
    confidence: float
    depth_max_m: float
    depth_mean_m: float
    depth_unc_m: float
    faf: float
    expected_loss: float
    tier: int
    occupancy: str
    stories: int
    sar_date: str

    @classmethod
    def from_scored(cls, sp: ScoredProperty, tier: int, sar_date: str) -> "OutputRow":
        prop = sp.property
        return cls(
            claim_id=prop.claim_id,
            parcel_id=prop.parcel_id,
            latitude=prop.centroid[0],
            longitude=prop.centroid[1],
            severity_score=sp.severity,
            confidence=sp.confidence,
            depth_max_m=sp.stats.d_max_m,
            depth_mean_m=sp.stats.d_mean_m,
            depth_unc_m=sp.stats.dur_m,
            faf=sp.stats.faf,
            expected_loss=sp.expected_loss_usd,
            tier=tier,
            occupancy=prop.occupancy,
            stories=prop.stories,
            sar_date=sar_date,
        )

    def as_record(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "parcel_id": self.parcel_id,
            "latitude": _fmt(self.latitude),
            "longitude": _fmt(self.longitude),
            "severity_score": _fmt(self.severity_score),
            "confidence": _fmt(self.confidence),
            "depth_max_m": _fmt(self.depth_max_m),
            "depth_mean_m": _fmt(self.depth_mean_m),
            "depth_unc_m": _fmt(self.depth_unc_m),
            "faf": _fmt(self.faf),
            "expected_loss": _fmt(self.expected_loss),
            "tier": self.tier,
            "occupancy": self.occupancy,
            "stories": self.stories,
            "sar_date": self.sar_date,
        }


def _fmt(value: float) -> str:
    """Floats with 6 significant digits."""
    return f"{value:.6g}"


def build_rows(ranked: Sequence[ScoredProperty], tiers: Sequence[int],
               sar_date: str) -> list[OutputRow]:
    return [
        OutputRow.from_scored(sp, tier, sar_date)
        for sp, tier in zip(ranked, tiers)
    ]


def write_triage_csv(rows: Sequence[OutputRow], path) -> None:
    """RFC-4180 CSV with the exact 15-column schema, ranked order."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\r\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_record())


def _ring_area(ring: Sequence[tuple[float, float]]) -> float:
    """Signed shoelace area; positive for counterclockwise winding."""
    area = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return area / 2.0


def write_geojson(rows: Sequence[OutputRow],
                  footprints: dict[str, Sequence[tuple[float, float]]],
                  path) -> None:
    """RFC 7946 FeatureCollection: closed, counterclockwise exterior rings
    in lon-lat order, with the full CSV attribute set per feature."""
    features = []
    for row in rows:
        ring = footprints.get(row.parcel_id)
        if ring is None:
            raise GeometryError(f"no footprint for parcel {row.parcel_id}")
        ring = [tuple(map(float, p)) for p in ring]
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]
        if len(ring) < 3:
            raise GeometryError(f"degenerate ring for parcel {row.parcel_id}")
        if _ring_area(ring) < 0:
            ring = ring[::-1]
        ring.append(ring[0])  # close
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [[list(p) for p in ring]]},
            "properties": row.as_record(),
        })
    collection = {"type": "FeatureCollection", "features": features}
    with open(path, "w") as fh:
        json.dump(collection, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_summary(rows: Sequence[OutputRow], ranked, truth_high: set[str] | None,
                  inundated_cells: int, cell_area_m2: float, path,
                  boundaries: TierBoundaries = TierBoundaries()) -> None:
    """Event summary: inundated area, per-tier counts and aggregate loss,
    and IRR at 90% recall when ground truth is available."""
    area_km2 = inundated_cells * cell_area_m2 / 1e6
    tier_counts = {1: 0, 2: 0, 3: 0}
    tier_loss = {1: 0.0, 2: 0.0, 3: 0.0}
    for row in rows:
        tier_counts[row.tier] += 1
        # sum the serialized values so summary equals CSV re-summation exactly
        tier_loss[row.tier] += float(_fmt(row.expected_loss))
    lines = [
        "EVENT SUMMARY",
        "=============",
        f"properties_total: {len(rows)}",
        f"inundated_cells: {inundated_cells}",
        f"inundated_area_km2: {_fmt(area_km2)}",
        "",
        "tier  count  aggregate_expected_loss_usd",
    ]
    for tier in (1, 2, 3):
        lines.append(f"{tier}     {tier_counts[tier]:<6d} {_fmt(tier_loss[tier])}")
    total_loss = sum(tier_loss.values())
    lines.append(f"total_expected_loss_usd: {_fmt(total_loss)}")
    if truth_high:
        lines.append(f"irr_at_90pct_recall: {_fmt(irr_at_recall(ranked, truth_high, 0.90))}")
    Path(path).write_text("\n".join(lines) + "\n")
