"""Shared fixtures and small builders used across the test modules."""

import numpy as np
import pytest

from floodtriage import (
    DamageCurve,
    DepthStats,
    GeoTransform,
    Property,
    Raster,
    ScoredProperty,
)


def make_transform(n_rows, n_cols, cell=10.0, ox=0.0, oy=None):
    if oy is None:
        oy = n_rows * cell
    return GeoTransform(ox, oy, cell, -cell, n_rows, n_cols)


def make_raster(cells, cell=10.0, nodata=None):
    cells = np.asarray(cells)
    tr = make_transform(cells.shape[0], cells.shape[1], cell)
    return Raster(tr, cells, nodata)


def make_scored(claim_id, severity, confidence=0.5, high=False,
                loss=0.0, stats=None):
    prop = Property(
        claim_id=claim_id, parcel_id="P" + claim_id,
        centroid=(0.0, 0.0),
        footprint=[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)],
    )
    if stats is None:
        stats = DepthStats(d_max_m=1.0, d_mean_m=0.5, faf=0.5, dur_m=0.2)
    return ScoredProperty(
        property=prop, stats=stats, severity=severity,
        confidence=confidence, expected_loss_usd=loss, high_severity=high,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dem():
    # gentle west-east ramp with a shallow pit at (2, 2)
    z = np.add.outer(np.zeros(5), np.linspace(10.0, 14.0, 5))
    z[2, 2] = 9.0
    return make_raster(z)
