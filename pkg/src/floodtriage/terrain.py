"""Height Above Nearest Drainage from a DEM and a drainage mask.

D8 directions are assigned by steepest descent with a fixed deterministic
tie-break order, and HAND follows each flow path to the first drainage
cell. Priority-flood depression filling is available for hydrologic
conditioning of noisy DEMs before routing.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import NoDrainage
from .raster import Raster, require_same_transform

# Fixed neighbor order: E, SE, S, SW, W, NW, N, NE (determinism contract).
NEIGHBOR_OFFSETS = (
    (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1),
)
NEIGHBOR_DISTANCES = tuple(np.hypot(dr, dc) for dr, dc in NEIGHBOR_OFFSETS)
OUTLET = -1  # direction sentinel for pits/outlets


@dataclass
class FlowField:
    """D8 directions: index into NEIGHBOR_OFFSETS, or OUTLET."""

    direction: Raster

    @property
    def codes(self) -> np.ndarray:
        return self.direction.cells


def priority_flood_fill(dem: Raster, outlets: Raster | None = None) -> Raster:
    """Fill depressions to their spill elevation (Priority-Flood).

    The flood is seeded from the raster border and, when given, from
    ``outlets`` cells at their own elevation. With outlets supplied, every
    depression not containing an outlet is filled until it spills toward
    one, so downstream flow routing can always escape.
    """
    z = dem.filled()
    n_rows, n_cols = z.shape
    filled = z.copy()
    visited = np.zeros(z.shape, dtype=bool)
    if outlets is not None:
        require_same_transform(dem, outlets)
    heap = []
    seq = 0
    for r in range(n_rows):
        for c in range(n_cols):
            if (
                r in (0, n_rows - 1) or c in (0, n_cols - 1)
                or (outlets is not None and outlets.cells[r, c])
            ):
                heapq.heappush(heap, (filled[r, c], seq, r, c))
                seq += 1
                visited[r, c] = True
    while heap:
        elev, _, r, c = heapq.heappop(heap)
        for dr, dc in NEIGHBOR_OFFSETS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < n_rows and 0 <= nc < n_cols and not visited[nr, nc]:
                visited[nr, nc] = True
                filled[nr, nc] = max(filled[nr, nc], elev)
                heapq.heappush(heap, (filled[nr, nc], seq, nr, nc))
                seq += 1
    return dem.with_cells(filled)


def d8_flow(dem: Raster, outlets: Raster | None = None) -> FlowField:
    """Steepest-descent D8 directions.

    Without ``outlets``, descent uses the original elevations, so depression
    interiors chain to their pit (where ponded water actually collects)
    instead of being routed over the spill; the pit itself is a terminal
    OUTLET. With ``outlets`` (e.g. the drainage network), the DEM is first
    conditioned by outlet-seeded depression filling so every path escapes
    toward an outlet or the border; spurious pits from DEM noise then cannot
    strand their catchments.

    Ties and flats are resolved deterministically: among equally steep
    neighbors the first in the fixed E,SE,S,SW,W,NW,N,NE order wins; flat
    cells point to an already-resolved equal-elevation neighbor, so every
    path terminates. Border flat cells with no resolved neighbor become
    outlets.
    """
    if outlets is not None:
        z = priority_flood_fill(dem, outlets).filled()
    else:
        z = dem.filled()
    n_rows, n_cols = z.shape
    direction = np.full(z.shape, OUTLET, dtype=np.int8)
    resolved = np.zeros(z.shape, dtype=bool)

    # Pass 1: strict steepest descent.
    for r in range(n_rows):
        for c in range(n_cols):
            best_drop = 0.0
            best_k = OUTLET
            for k, (dr, dc) in enumerate(NEIGHBOR_OFFSETS):
                nr, nc = r + dr, c + dc
                if 0 <= nr < n_rows and 0 <= nc < n_cols:
                    drop = (z[r, c] - z[nr, nc]) / NEIGHBOR_DISTANCES[k]
                    if drop > best_drop:
                        best_drop = drop
                        best_k = k
            if best_k != OUTLET:
                direction[r, c] = best_k
                resolved[r, c] = True

    # Pass 2: border flats and flat outlet cells become terminal.
    for r in range(n_rows):
        for c in range(n_cols):
            if not resolved[r, c] and (
                r in (0, n_rows - 1) or c in (0, n_cols - 1)
                or (outlets is not None and outlets.cells[r, c])
            ):
                direction[r, c] = OUTLET
                resolved[r, c] = True

    # Pass 3: propagate across interior flats toward resolved cells.
    changed = True
    while changed:
        changed = False
        for r in range(n_rows):
            for c in range(n_cols):
                if resolved[r, c]:
                    continue
                for k, (dr, dc) in enumerate(NEIGHBOR_OFFSETS):
                    nr, nc = r + dr, c + dc
                    if (
                        0 <= nr < n_rows and 0 <= nc < n_cols
                        and resolved[nr, nc] and z[nr, nc] <= z[r, c]
                    ):
                        direction[r, c] = k
                        resolved[r, c] = True
                        changed = True
                        break
    # Any remaining unresolved cell (isolated flat) terminates locally.
    direction[~resolved] = OUTLET
    return FlowField(Raster(dem.transform, direction))


def compute_hand(dem: Raster, drainage: Raster, flow: FlowField) -> Raster:
    """HAND: elevation above the first drainage cell along the D8 path.

    Drainage cells get exactly 0; cells whose path terminates without
    reaching drainage get +inf (always gated out downstream). Paths descend
    monotonically, so the difference is clamped at 0 only to absorb float
    noise across flat runs.
    """
    require_same_transform(dem, drainage, flow.direction)
    drain = drainage.cells.astype(bool)
    if not drain.any():
        raise NoDrainage("drainage mask is empty")
    z = dem.filled()
    codes = flow.codes
    n_rows, n_cols = z.shape
    drain_elev = np.full(z.shape, np.nan)
    drain_elev[drain] = z[drain]
    done = drain.copy()

    for r0 in range(n_rows):
        for c0 in range(n_cols):
            if done[r0, c0]:
                continue
            path = []
            r, c = r0, c0
            while not done[r, c]:
                path.append((r, c))
                k = codes[r, c]
                if k == OUTLET:
                    break
                dr, dc = NEIGHBOR_OFFSETS[k]
                r, c = r + dr, c + dc
            if done[r, c]:
                base = drain_elev[r, c]
            else:
                base = np.nan  # outlet without drainage: unreachable
            for pr, pc in path:
                drain_elev[pr, pc] = base
                done[pr, pc] = True

    hand = z - drain_elev
    hand[np.isnan(drain_elev)] = np.inf
    hand = np.maximum(hand, 0.0)
    hand[drain] = 0.0
    return Raster(dem.transform, hand)


def hand_gate(hand: Raster, threshold_m: float = 10.0) -> Raster:
    """Flood-eligibility mask: True where HAND <= threshold."""
    if threshold_m <= 0:
        raise ValueError("threshold_m must be > 0")
    eligible = hand.cells <= threshold_m
    return Raster(hand.transform, eligible)
