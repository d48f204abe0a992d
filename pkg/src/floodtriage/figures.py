"""Report figures rendered to PNG alongside the delimited outputs.

All rendering uses the Agg backend so runs are headless and the written
bytes are deterministic for a fixed input.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .depth import DepthField
from .raster import Raster

_DPI = 120


def _extent(raster: Raster):
    tr = raster.transform
    x0 = tr.origin_x
    x1 = tr.origin_x + tr.n_cols * tr.pixel_size_x
    y0 = tr.origin_y + tr.n_rows * tr.pixel_size_y
    y1 = tr.origin_y
    return (x0, x1, min(y0, y1), max(y0, y1))


def save_posterior_figure(posterior: Raster, mask: Raster, path) -> None:
    """Posterior probability map with the extent contour overlaid."""
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(posterior.filled(), extent=_extent(posterior),
                   vmin=0.0, vmax=1.0, cmap="viridis")
    ax.contour(mask.cells.astype(float), levels=[0.5], colors="red",
               linewidths=0.8, extent=_extent(mask), origin="upper")
    fig.colorbar(im, ax=ax, label="posterior flood probability")
    ax.set_title("Flood posterior and extent")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_depth_figure(field: DepthField, path) -> None:
    """Depth map and CI half-width map side by side."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    d = field.depth.filled()
    im0 = axes[0].imshow(d, extent=_extent(field.depth), cmap="Blues")
    fig.colorbar(im0, ax=axes[0], label="depth (m)")
    axes[0].set_title("Flood depth")
    half = field.ci_half_width().filled()
    im1 = axes[1].imshow(half, extent=_extent(field.depth), cmap="magma")
    fig.colorbar(im1, ax=axes[1], label="90% CI half-width (m)")
    axes[1].set_title("Depth uncertainty")
    for ax in axes:
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_severity_figure(severities, tiers, path) -> None:
    """Severity histogram split by assigned tier."""
    severities = np.asarray(list(severities), dtype=float)
    tiers = np.asarray(list(tiers), dtype=int)
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0.0, max(1.0, severities.max() if severities.size else 1.0), 25)
    colors = {1: "#b30000", 2: "#e6a100", 3: "#1a7a1a"}
    labels = {1: "tier 1 (dispatch)", 2: "tier 2 (scheduled)", 3: "tier 3 (remote)"}
    stacks = [severities[tiers == t] for t in (1, 2, 3)]
    ax.hist(stacks, bins=bins, stacked=True,
            color=[colors[t] for t in (1, 2, 3)],
            label=[labels[t] for t in (1, 2, 3)])
    ax.set_xlabel("severity score")
    ax.set_ylabel("properties")
    ax.set_title("Severity by triage tier")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_irr_curve(ranked, truth: set[str], path) -> None:
    """IRR as a function of achieved recall under the ranking."""
    from .ranking import k_at_recall

    n = len(ranked)
    levels = np.linspace(0.0, 1.0, 101)
    irr_vals = [1.0 - k_at_recall(ranked, truth, rho) / n for rho in levels]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(levels, irr_vals, color="#1f4e9c")
    ax.fill_between(levels, irr_vals, alpha=0.15, color="#1f4e9c")
    ax.set_xlabel("recall of high-severity properties")
    ax.set_ylabel("inspection reduction rate")
    ax.set_title("IRR vs recall")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
