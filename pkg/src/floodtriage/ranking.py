"""Stage 5 ranking, tier assignment, and the triage evaluation metrics
(IRR, Recall, dFDR, TES, AUIRC) plus pixel extent metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BadBoundaries, BadCutoff, EmptyTruth
from .raster import Raster, require_same_transform
from .scoring import ScoredProperty


@dataclass
class TierBoundaries:
    t1: float = 0.40  # severity at/above which: immediate dispatch
    t2: float = 0.15  # severity below which remote settlement is possible
    c3_min: float = 0.70  # confidence needed for remote settlement

    def __post_init__(self):
        if not (0.0 < self.t2 < self.t1 < 1.0):
            raise BadBoundaries(f"need 0 < t2 < t1 < 1, got t1={self.t1}, t2={self.t2}")


def rank(scored: Sequence[ScoredProperty]) -> list[ScoredProperty]:
    """Descending severity, ties by descending confidence, then claim_id."""
    return sorted(
        scored,
        key=lambda sp: (-sp.severity, -sp.confidence, sp.property.claim_id),
    )


def assign_tiers(ranked: Sequence[ScoredProperty],
                 boundaries: TierBoundaries = TierBoundaries()) -> list[int]:
    """Tier per property: 1 immediate dispatch, 3 remote settlement,
    2 scheduled inspection (including the low-severity low-confidence
    fallback)."""
    tiers = []
    for sp in ranked:
        if sp.severity >= boundaries.t1:
            tiers.append(1)
        elif sp.severity < boundaries.t2 and sp.confidence >= boundaries.c3_min:
            tiers.append(3)
        else:
            tiers.append(2)
    return tiers


def irr(k: int, n_fnol: int) -> float:
    """Inspection Reduction Rate: 1 - k/N."""
    if n_fnol <= 0:
        raise BadCutoff("n_fnol must be > 0")
    if not (0 <= k <= n_fnol):
        raise BadCutoff(f"k={k} outside [0, {n_fnol}]")
    return 1.0 - k / n_fnol


def recall_dfdr(ranked: Sequence[ScoredProperty], truth: set[str],
                k: int) -> tuple[float, float]:
    """Recall and dispatch false discovery proportion of the top-k prefix.

    ``truth`` holds the claim_ids of ground-truth high-severity properties.
    dFDR at k=0 is defined as 0 (no dispatches, no false discoveries).
    """
    if len(truth) == 0:
        raise EmptyTruth("ground-truth high-severity set is empty")
    if not (0 <= k <= len(ranked)):
        raise BadCutoff(f"k={k} outside [0, {len(ranked)}]")
    top = [sp.property.claim_id for sp in ranked[:k]]
    hits = sum(1 for cid in top if cid in truth)
    recall = hits / len(truth)
    dfdr = (k - hits) / k if k > 0 else 0.0
    return recall, dfdr


def tes(ranked: Sequence[ScoredProperty], truth: set[str], k: int) -> float:
    """Triage Efficiency Score: IRR * Recall * (1 - dFDR) at cutoff k."""
    r, d = recall_dfdr(ranked, truth, k)
    return irr(k, len(ranked)) * r * (1.0 - d)


def _recall_curve(ranked: Sequence[ScoredProperty], truth: set[str]) -> np.ndarray:
    """Cumulative recall after each dispatch; index k holds Recall(k)."""
    hits = np.fromiter(
        (1.0 if sp.property.claim_id in truth else 0.0 for sp in ranked),
        dtype=np.float64, count=len(ranked),
    )
    curve = np.concatenate([[0.0], np.cumsum(hits) / len(truth)])
    return curve


def k_at_recall(ranked: Sequence[ScoredProperty], truth: set[str],
                rho: float) -> int:
    """Minimum dispatch count achieving recall >= rho (N if unreachable)."""
    if len(truth) == 0:
        raise EmptyTruth("ground-truth high-severity set is empty")
    curve = _recall_curve(ranked, truth)
    reached = np.flatnonzero(curve >= rho - 1e-12)
    return int(reached[0]) if reached.size else len(ranked)


def irr_at_recall(ranked: Sequence[ScoredProperty], truth: set[str],
                  rho: float = 0.90) -> float:
    return irr(k_at_recall(ranked, truth, rho), len(ranked))


def auirc(ranked: Sequence[ScoredProperty], truth: set[str],
          grid: Iterable[float] | None = None) -> float:
    """Area under the IRR-versus-recall curve.

    IRR(rho) = 1 - k(rho)/N is a right-continuous step function that jumps
    only at the attainable recall levels j/|truth|, so by default the
    integral is computed exactly as the mean of IRR over those levels
    (a trapezoid that includes rho=0 would instead sample the trivial
    k=0, IRR=1 point and bias the area upward by ~1/(2*levels)). Passing
    an explicit ``grid`` falls back to a trapezoid over that grid.
    """
    if len(truth) == 0:
        raise EmptyTruth("ground-truth high-severity set is empty")
    curve = _recall_curve(ranked, truth)
    n = len(ranked)
    if grid is None:
        n_truth = len(truth)
        total = 0.0
        for j in range(1, n_truth + 1):
            reached = np.flatnonzero(curve >= j / n_truth - 1e-12)
            k = int(reached[0]) if reached.size else n
            total += 1.0 - k / n
        return total / n_truth
    levels = np.asarray(list(grid))
    irr_vals = np.empty(len(levels))
    for i, rho in enumerate(levels):
        reached = np.flatnonzero(curve >= rho - 1e-12)
        k = int(reached[0]) if reached.size else n
        irr_vals[i] = 1.0 - k / n
    return float(np.trapezoid(irr_vals, levels))


def extent_metrics(pred: Raster, truth: Raster) -> dict[str, float]:
    """Pixel confusion metrics; empty-union IoU is defined as 1."""
    require_same_transform(pred, truth)
    p = pred.cells.astype(bool)
    t = truth.cells.astype(bool)
    tp = float(np.sum(p & t))
    fp = float(np.sum(p & ~t))
    fn = float(np.sum(~p & t))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    union = tp + fp + fn
    iou = tp / union if union > 0 else 1.0
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn > 0 else 0.0
    return {"precision": precision, "recall": recall, "iou": iou, "f1": f1}


@dataclass
class TriageMetrics:
    irr_at_recall: dict[float, float]
    tes: float
    auirc: float
    extent: dict[str, float] = field(default_factory=dict)


def evaluate_triage(ranked: Sequence[ScoredProperty], truth: set[str],
                    recall_levels: Sequence[float] = (0.90, 0.95),
                    tau_star: float = 0.40) -> TriageMetrics:
    """Standard metric bundle; TES is reported at the dispatch count induced
    by the severity threshold tau_star, k = |{i : s_i >= tau_star}|."""
    k_tau = sum(1 for sp in ranked if sp.severity >= tau_star)
    return TriageMetrics(
        irr_at_recall={rho: irr_at_recall(ranked, truth, rho) for rho in recall_levels},
        tes=tes(ranked, truth, k_tau),
        auirc=auirc(ranked, truth),
    )


def sensitivity_sweep(scored: Sequence[ScoredProperty],
                      truth_by_theta: dict[float, set[str]],
                      thetas: Sequence[float],
                      boundaries: TierBoundaries = TierBoundaries(),
                      boundary_delta: float = 0.05) -> list[dict]:
    """Triage metrics per damage threshold, with tier-boundary perturbation
    deltas. Rows whose truth set is empty are flagged instead of computed."""
    if not thetas:
        raise ValueError("thetas must be non-empty")
    ranked = rank(scored)
    rows = []
    for theta in thetas:
        truth = truth_by_theta.get(theta, set())
        row = {"theta": theta, "n_high": len(truth)}
        if not truth:
            row["error"] = "EmptyTruth"
            rows.append(row)
            continue
        row["irr_at_90"] = irr_at_recall(ranked, truth, 0.90)
        k_tau = sum(1 for sp in ranked if sp.severity >= boundaries.t1)
        row["tes"] = tes(ranked, truth, k_tau)
        row["auirc"] = auirc(ranked, truth)
        for sign, tag in ((+1, "up"), (-1, "down")):
            t1 = boundaries.t1 + sign * boundary_delta
            if 0.0 < boundaries.t2 < t1 < 1.0:
                k_pert = sum(1 for sp in ranked if sp.severity >= t1)
                row[f"tes_t1_{tag}"] = tes(ranked, truth, k_pert) - row["tes"]
        rows.append(row)
    return rows
