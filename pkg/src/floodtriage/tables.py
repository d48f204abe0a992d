"""Tabular file contracts: parcel CSV with footprint polygons, the
ground-truth property table, and the intermediate scored-property table
passed between the scoring and triage stages."""

from __future__ import annotations

import csv
import re
from pathlib import Path
from typing import Sequence

from .errors import ParseError
from .scoring import DepthStats, Property, ScoredProperty

PARCEL_COLUMNS = (
    "claim_id", "parcel_id", "lat", "lon", "occupancy", "stories",
    "insured_value", "footprint",
)

_POLYGON_RE = re.compile(r"^POLYGON\s*\(\(\s*(.*?)\s*\)\)$", re.IGNORECASE)


def _r(value) -> str:
    """Full-precision float repr (coerces numpy scalars)."""
    return repr(float(value))


def format_polygon(ring: Sequence[tuple[float, float]]) -> str:
    """WKT-like polygon string with an explicitly closed ring."""
    pts = [tuple(map(float, p)) for p in ring]
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    body = ", ".join(f"{x!r} {y!r}" for x, y in pts)
    return f"POLYGON(({body}))"


def parse_polygon(text: str) -> list[tuple[float, float]]:
    match = _POLYGON_RE.match(text.strip())
    if not match:
        raise ParseError(f"bad polygon string: {text[:60]!r}")
    pts = []
    for token in match.group(1).split(","):
        parts = token.split()
        if len(parts) != 2:
            raise ParseError(f"bad polygon vertex: {token.strip()!r}")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"non-numeric polygon vertex: {token.strip()!r}") from exc
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(pts) < 3:
        raise ParseError("polygon ring needs at least 3 distinct vertices")
    return pts


def write_parcels(parcels: Sequence[Property], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(PARCEL_COLUMNS)
        for p in parcels:
            writer.writerow([
                p.claim_id, p.parcel_id, _r(p.centroid[0]), _r(p.centroid[1]),
                p.occupancy, p.stories, _r(p.insured_value_usd),
                format_polygon(p.footprint),
            ])


def read_parcels(path) -> list[Property]:
    parcels = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(PARCEL_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"parcel file missing columns: {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                parcels.append(Property(
                    claim_id=row["claim_id"],
                    parcel_id=row["parcel_id"],
                    centroid=(float(row["lat"]), float(row["lon"])),
                    footprint=parse_polygon(row["footprint"]),
                    occupancy=row["occupancy"],
                    stories=int(row["stories"]),
                    insured_value_usd=float(row["insured_value"]),
                ))
            except (ValueError, KeyError) as exc:
                raise ParseError(f"parcel file line {lineno}: {exc}") from exc
    return parcels


TRUTH_COLUMNS = ("claim_id", "parcel_id", "depth", "faf", "severity", "loss",
                 "high_severity")


def write_truth_table(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(TRUTH_COLUMNS)
        for r in rows:
            writer.writerow([
                r["claim_id"], r["parcel_id"], _r(r["depth"]), _r(r["faf"]),
                _r(r["severity"]), _r(r["loss"]),
                int(bool(r["high_severity"])),
            ])


def read_truth_table(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRUTH_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"truth table missing columns: {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                rows.append({
                    "claim_id": row["claim_id"],
                    "parcel_id": row["parcel_id"],
                    "depth": float(row["depth"]),
                    "faf": float(row["faf"]),
                    "severity": float(row["severity"]),
                    "loss": float(row["loss"]),
                    "high_severity": bool(int(row["high_severity"])),
                })
            except ValueError as exc:
                raise ParseError(f"truth table line {lineno}: {exc}") from exc
    return rows


SCORED_COLUMNS = (
    "claim_id", "parcel_id", "lat", "lon", "occupancy", "stories",
    "insured_value", "severity", "confidence", "expected_loss",
    "d_max", "d_mean", "faf", "dur", "high_severity",
)


def write_scored(scored: Sequence[ScoredProperty], path) -> None:
    """Intermediate scored-property table (full precision, unranked)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(SCORED_COLUMNS)
        for sp in scored:
            p = sp.property
            writer.writerow([
                p.claim_id, p.parcel_id, _r(p.centroid[0]), _r(p.centroid[1]),
                p.occupancy, p.stories, _r(p.insured_value_usd),
                _r(sp.severity), _r(sp.confidence), _r(sp.expected_loss_usd),
                _r(sp.stats.d_max_m), _r(sp.stats.d_mean_m),
                _r(sp.stats.faf), _r(sp.stats.dur_m),
                int(sp.high_severity),
            ])


def read_scored(path, parcels: Sequence[Property] | None = None) -> list[ScoredProperty]:
    """Rebuild scored properties; footprints come from ``parcels`` when given
    (needed for GeoJSON), otherwise a degenerate placeholder ring is used."""
    by_id = {p.parcel_id: p for p in parcels} if parcels else {}
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SCORED_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"scored table missing columns: {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                prop = by_id.get(row["parcel_id"])
                if prop is None:
                    lat, lon = float(row["lat"]), float(row["lon"])
                    prop = Property(
                        claim_id=row["claim_id"],
                        parcel_id=row["parcel_id"],
                        centroid=(lat, lon),
                        footprint=[(lon, lat), (lon + 1e-3, lat),
                                   (lon, lat + 1e-3)],
                        occupancy=row["occupancy"],
                        stories=int(row["stories"]),
                        insured_value_usd=float(row["insured_value"]),
                    )
                stats = DepthStats(
                    d_max_m=float(row["d_max"]),
                    d_mean_m=float(row["d_mean"]),
                    faf=float(row["faf"]),
                    dur_m=float(row["dur"]),
                )
                out.append(ScoredProperty(
                    property=prop,
                    stats=stats,
                    severity=float(row["severity"]),
                    confidence=float(row["confidence"]),
                    expected_loss_usd=float(row["expected_loss"]),
                    high_severity=bool(int(row["high_severity"])),
                ))
            except ValueError as exc:
                raise ParseError(f"scored table line {lineno}: {exc}") from exc
    return out
