"""Raster container and local raster operation tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from floodtriage import Raster, RasterStack, lee_sigma_filter, median_composite
from floodtriage.errors import (
    BadKernel,
    EmptyStack,
    NonPositiveCell,
    TransformMismatch,
)
from floodtriage.raster import from_db, to_db

from conftest import make_raster, make_transform


class TestGeoTransform:
    def test_cell_center_roundtrip(self):
        tr = make_transform(8, 6, cell=25.0)
        x, y = tr.cell_center(3, 4)
        row, col = tr.index_of(x, y)
        assert (row, col) == (3, 4)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            make_transform(0, 4)
        with pytest.raises(ValueError):
            make_transform(4, 4, cell=-1.0)

    def test_cell_area(self):
        assert make_transform(4, 4, cell=10.0).cell_area == pytest.approx(100.0)


class TestRaster:
    def test_shape_mismatch_rejected(self):
        tr = make_transform(3, 3)
        with pytest.raises(ValueError):
            Raster(tr, np.zeros((3, 4)))

    def test_nodata_mask_combines_nan_and_sentinel(self):
        r = make_raster([[1.0, np.nan], [-9999.0, 4.0]], nodata=-9999.0)
        assert r.nodata_mask().tolist() == [[False, True], [True, False]]
        assert sorted(r.valid_values().tolist()) == [1.0, 4.0]

    def test_stack_requires_same_transform(self):
        a = make_raster(np.zeros((3, 3)))
        b = Raster(make_transform(3, 3, ox=50.0), np.zeros((3, 3)))
        with pytest.raises(TransformMismatch):
            RasterStack([a, b])
        with pytest.raises(EmptyStack):
            RasterStack([])


class TestDbConversion:
    def test_known_values(self):
        r = make_raster([[1.0, 10.0], [100.0, 0.001]])
        db = to_db(r)
        np.testing.assert_allclose(db.cells, [[0.0, 10.0], [20.0, -30.0]],
                                   atol=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveCell):
            to_db(make_raster([[1.0, 0.0]], cell=10.0))

    @given(hnp.arrays(np.float64, (4, 4),
                      elements=st.floats(1e-6, 1e6, allow_nan=False)))
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_property(self, cells):
        r = make_raster(cells)
        back = from_db(to_db(r))
        np.testing.assert_allclose(back.cells, cells, rtol=1e-12)


class TestMedianComposite:
    def test_elementwise_median(self):
        layers = [make_raster(np.full((2, 2), v)) for v in (1.0, 5.0, 3.0)]
        out = median_composite(RasterStack(layers))
        assert np.all(out.cells == 3.0)

    def test_ignores_nodata_until_all_missing(self):
        a = make_raster([[1.0, np.nan]])
        b = make_raster([[3.0, np.nan]])
        out = median_composite(RasterStack([a, b]))
        assert out.cells[0, 0] == 2.0
        assert np.isnan(out.cells[0, 1])

    def test_matches_nanmedian_oracle(self, rng):
        data = rng.normal(size=(5, 16, 16))
        data[rng.random((5, 16, 16)) < 0.2] = np.nan
        stack = RasterStack([make_raster(layer) for layer in data])
        out = median_composite(stack)
        expect = np.nanmedian(data, axis=0)
        both = ~np.isnan(expect)
        np.testing.assert_allclose(out.cells[both], expect[both])


class TestLeeSigma:
    def test_constant_region_unchanged(self):
        r = make_raster(np.full((9, 9), 7.0))
        out = lee_sigma_filter(r)
        np.testing.assert_allclose(out.cells, 7.0)

    def test_rejects_even_or_small_kernel(self):
        r = make_raster(np.ones((9, 9)))
        for kernel in (2, 4, 1):
            with pytest.raises(BadKernel):
                lee_sigma_filter(r, kernel=kernel)

    def test_smooths_speckle(self, rng):
        # multiplicative speckle around a flat field shrinks in variance
        r = make_raster(1.0 * rng.gamma(4.0, 1.0 / 4.0, size=(32, 32)))
        out = lee_sigma_filter(r)
        assert np.std(out.cells) < 0.5 * np.std(r.cells)

    def test_preserves_strong_edge(self, rng):
        cells = np.where(np.arange(24)[None, :] < 12, 0.05, 1.0)
        cells = cells * rng.gamma(16.0, 1.0 / 16.0, size=(24, 24))
        out = lee_sigma_filter(make_raster(cells))
        dark = out.cells[:, :10].mean()
        bright = out.cells[:, 14:].mean()
        assert bright / dark > 5.0

    def test_output_within_window_range(self, rng):
        cells = rng.gamma(2.0, 1.0, size=(16, 16))
        out = lee_sigma_filter(make_raster(cells), kernel=3)
        padded = np.pad(cells, 1, constant_values=np.nan)
        for r in range(16):
            for c in range(16):
                win = padded[r : r + 3, c : c + 3]
                assert np.nanmin(win) - 1e-12 <= out.cells[r, c] <= np.nanmax(win) + 1e-12

    def test_nodata_passthrough(self):
        cells = np.ones((7, 7))
        cells[3, 3] = np.nan
        out = lee_sigma_filter(make_raster(cells))
        assert np.isnan(out.cells[3, 3])
        assert np.isfinite(out.cells[0, 0])
