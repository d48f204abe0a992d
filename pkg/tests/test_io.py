"""File-format tests: rasters, tables, config, and the output products."""

import csv
import json

import numpy as np
import pytest

from floodtriage import GeoTransform, Raster
from floodtriage.config import PipelineConfig, read_config, write_config
from floodtriage.errors import FormatMismatch, ParseError
from floodtriage.outputs import (
    CSV_COLUMNS,
    OutputRow,
    write_geojson,
    write_summary,
    write_triage_csv,
)
from floodtriage.raster_io import (
    read_ascii,
    read_binary,
    read_raster,
    write_ascii,
    write_binary,
    write_raster,
)
from floodtriage.tables import (
    format_polygon,
    parse_polygon,
    read_parcels,
    read_scored,
    read_truth_table,
    write_parcels,
    write_scored,
    write_truth_table,
)

from conftest import make_raster, make_scored


class TestAsciiGrid:
    def test_round_trip_exact(self, tmp_path, rng):
        r = make_raster(rng.random((6, 9)) * 100)
        p = tmp_path / "grid.asc"
        write_ascii(r, p)
        back = read_ascii(p)
        np.testing.assert_array_equal(back.cells, r.cells)
        assert back.transform.n_rows == 6 and back.transform.n_cols == 9
        assert back.transform.pixel_size_x == 10.0
        assert back.transform.origin_y == pytest.approx(60.0)

    def test_nan_maps_to_nodata_and_back(self, tmp_path):
        cells = np.array([[1.0, np.nan], [3.0, 4.0]])
        p = tmp_path / "grid.asc"
        write_ascii(make_raster(cells), p)
        assert "-9999.0" in p.read_text()
        back = read_ascii(p)
        assert np.isnan(back.cells[0, 1]) and back.cells[1, 0] == 3.0

    def test_non_square_cells_rejected(self, tmp_path):
        tr = GeoTransform(0.0, 20.0, 10.0, -5.0, 4, 4)
        r = Raster(tr, np.zeros((4, 4)))
        with pytest.raises(FormatMismatch):
            write_ascii(r, tmp_path / "bad.asc")

    def test_missing_header_field(self, tmp_path):
        p = tmp_path / "bad.asc"
        p.write_text("NCOLS 2\nNROWS 2\nXLLCORNER 0\nYLLCORNER 0\n1 2\n3 4\n")
        with pytest.raises(ParseError, match="CELLSIZE"):
            read_ascii(p)

    def test_cell_count_mismatch(self, tmp_path):
        p = tmp_path / "bad.asc"
        p.write_text("NCOLS 2\nNROWS 2\nXLLCORNER 0\nYLLCORNER 0\n"
                     "CELLSIZE 10\n1 2 3\n")
        with pytest.raises(ParseError, match="cells"):
            read_ascii(p)


class TestBinaryRaster:
    def test_float_round_trip_lossless(self, tmp_path, rng):
        tr = GeoTransform(123.5, -77.25, 12.5, -12.5, 5, 7, "utm-33n/test")
        r = Raster(tr, rng.standard_normal((5, 7)), nodata=-1.5)
        p = tmp_path / "r.altr"
        write_binary(r, p)
        back = read_binary(p)
        np.testing.assert_array_equal(back.cells, r.cells)
        assert back.transform == tr
        assert back.transform.crs_label == "utm-33n/test"
        assert back.nodata == -1.5

    def test_bool_round_trip(self, tmp_path, rng):
        r = make_raster(rng.random((8, 8)) < 0.5)
        p = tmp_path / "m.altr"
        write_binary(r, p)
        back = read_binary(p)
        assert back.cells.dtype == bool
        np.testing.assert_array_equal(back.cells, r.cells)

    def test_magic_bytes(self, tmp_path, rng):
        p = tmp_path / "r.altr"
        write_binary(make_raster(rng.random((3, 3))), p)
        assert p.read_bytes()[:4] == b"ALTR"

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.altr"
        p.write_bytes(b"NOPE" + b"\x00" * 100)
        with pytest.raises(FormatMismatch):
            read_binary(p)

    def test_truncated_rejected(self, tmp_path):
        p = tmp_path / "tiny.altr"
        p.write_bytes(b"ALTR\x01")
        with pytest.raises(ParseError):
            read_binary(p)


class TestDispatch:
    def test_read_by_content_write_by_suffix(self, tmp_path, rng):
        r = make_raster(rng.random((4, 4)))
        write_raster(r, tmp_path / "a.asc")
        write_raster(r, tmp_path / "b.grd")
        assert (tmp_path / "b.grd").read_bytes()[:4] == b"ALTR"
        for name in ("a.asc", "b.grd"):
            back = read_raster(tmp_path / name)
            np.testing.assert_array_equal(back.cells, r.cells)


class TestPolygonText:
    def test_round_trip(self):
        ring = [(0.0, 0.0), (10.5, 0.0), (10.5, 7.25)]
        assert parse_polygon(format_polygon(ring)) == ring

    def test_closed_input_normalized(self):
        text = "POLYGON((0.0 0.0, 1.0 0.0, 1.0 1.0, 0.0 0.0))"
        assert len(parse_polygon(text)) == 3

    def test_malformed(self):
        for bad in ("LINESTRING(0 0, 1 1)", "POLYGON((0 0, 1 1))",
                    "POLYGON((0 0 0, 1 1 1, 2 2 2))", "POLYGON((a b, c d, e f))"):
            with pytest.raises(ParseError):
                parse_polygon(bad)


class TestTables:
    def test_parcels_round_trip(self, tmp_path):
        from floodtriage import ScenarioSpec, generate
        inputs, _ = generate(ScenarioSpec(n_rows=32, n_cols=32,
                                          parcel_grid=(3, 3), seed=1))
        p = tmp_path / "parcels.csv"
        write_parcels(inputs.parcels, p)
        back = read_parcels(p)
        assert back == inputs.parcels

    def test_parcels_missing_column(self, tmp_path):
        p = tmp_path / "parcels.csv"
        p.write_text("claim_id,parcel_id\r\nA,B\r\n")
        with pytest.raises(ParseError, match="missing columns"):
            read_parcels(p)

    def test_truth_round_trip(self, tmp_path):
        rows = [
            {"claim_id": "A", "parcel_id": "PA", "depth": 1.25, "faf": 0.5,
             "severity": 0.3, "loss": 12345.5, "high_severity": True},
            {"claim_id": "B", "parcel_id": "PB", "depth": 0.0, "faf": 0.0,
             "severity": 0.0, "loss": 0.0, "high_severity": False},
        ]
        p = tmp_path / "truth.csv"
        write_truth_table(rows, p)
        assert read_truth_table(p) == rows

    def test_scored_round_trip_with_parcels(self, tmp_path):
        scored = [make_scored("A", 0.7, confidence=0.4, high=True, loss=900.5),
                  make_scored("B", 0.1)]
        p = tmp_path / "scored.csv"
        write_scored(scored, p)
        parcels = [sp.property for sp in scored]
        back = read_scored(p, parcels)
        assert back == scored

    def test_scored_without_parcels_keeps_values(self, tmp_path):
        scored = [make_scored("A", 0.7, confidence=0.4, loss=900.5)]
        p = tmp_path / "scored.csv"
        write_scored(scored, p)
        back = read_scored(p)
        assert back[0].severity == 0.7 and back[0].confidence == 0.4
        assert back[0].property.claim_id == "A"


class TestConfig:
    def test_parse_values_and_relative_paths(self, tmp_path):
        (tmp_path / "cfg.txt").write_text(
            "# comment\n"
            "dem = data/dem.grd\n"
            "pre = data/p0.grd, data/p1.grd\n"
            "post = data/post.grd\n"
            "seed = 42\n"
            "n_mc = 64\n"
            "dem_sigma_m = 0.75\n"
            "channels = BCR,HAND\n"
            "apply_cci_premask = true\n"
        )
        cfg = read_config(tmp_path / "cfg.txt")
        assert cfg.dem == str(tmp_path / "data/dem.grd")
        assert cfg.pre == [str(tmp_path / "data/p0.grd"),
                           str(tmp_path / "data/p1.grd")]
        assert cfg.seed == 42 and cfg.n_mc == 64
        assert cfg.dem_sigma_m == 0.75
        assert cfg.channels == ("BCR", "HAND")
        assert cfg.apply_cci_premask is True

    def test_unknown_key_names_line(self, tmp_path):
        (tmp_path / "cfg.txt").write_text("dem = x\nbogus_key = 1\n")
        with pytest.raises(ParseError, match="line 2.*bogus_key"):
            read_config(tmp_path / "cfg.txt")

    def test_bad_value_and_bad_channel(self, tmp_path):
        (tmp_path / "a.txt").write_text("n_mc = many\n")
        with pytest.raises(ParseError, match="line 1"):
            read_config(tmp_path / "a.txt")
        (tmp_path / "b.txt").write_text("channels = BCR,XYZ\n")
        with pytest.raises(ParseError, match="XYZ"):
            read_config(tmp_path / "b.txt")

    def test_write_read_round_trip(self, tmp_path):
        cfg = PipelineConfig(
            dem=str(tmp_path / "dem.grd"), pre=[str(tmp_path / "p.grd")],
            post=str(tmp_path / "post.grd"), seed=9, n_mc=32,
            lambda_m=2.0, channels=("BCR", "CCI", "HAND"),
            output_dir=str(tmp_path / "out"),
        )
        write_config(cfg, tmp_path / "cfg.txt")
        back = read_config(tmp_path / "cfg.txt")
        assert back == cfg

    def test_seed_mandatory_for_params(self):
        with pytest.raises(ParseError, match="seed"):
            PipelineConfig().to_params()


def sample_rows():
    return [
        OutputRow("CLM00001", "P00001", -120.0, 640.0, 0.5, 0.25,
                  1.25, 0.625, 0.2, 0.75, 123456.789, 1, "RES1", 1,
                  "2017-08-30"),
        OutputRow("CLM00002", "P00002", -240.0, 320.0, 0.0, 0.1,
                  0.0, 0.0, 0.0, 0.0, 0.0, 2, "RES1", 2, "2017-08-30"),
    ]


class TestTriageCsv:
    def test_golden_bytes(self, tmp_path):
        p = tmp_path / "triage.csv"
        write_triage_csv(sample_rows(), p)
        expect = (
            "claim_id,parcel_id,latitude,longitude,severity_score,confidence,"
            "depth_max_m,depth_mean_m,depth_unc_m,faf,expected_loss,tier,"
            "occupancy,stories,sar_date\r\n"
            "CLM00001,P00001,-120,640,0.5,0.25,1.25,0.625,0.2,0.75,123457,1,"
            "RES1,1,2017-08-30\r\n"
            "CLM00002,P00002,-240,320,0,0.1,0,0,0,0,0,2,RES1,2,2017-08-30\r\n"
        )
        assert p.read_bytes() == expect.encode()

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_triage_csv(sample_rows(), a)
        write_triage_csv(sample_rows(), b)
        assert a.read_bytes() == b.read_bytes()


class TestGeojson:
    def test_parse_back_rings_closed_and_ccw(self, tmp_path):
        rows = sample_rows()
        footprints = {
            # clockwise on purpose: writer must flip the winding
            "P00001": [(0.0, 0.0), (0.0, 10.0), (10.0, 10.0), (10.0, 0.0)],
            "P00002": [(20.0, 0.0), (30.0, 0.0), (30.0, 10.0)],
        }
        p = tmp_path / "triage.geojson"
        write_geojson(rows, footprints, p)
        doc = json.loads(p.read_text())
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 2
        for feat, row in zip(doc["features"], rows):
            assert feat["geometry"]["type"] == "Polygon"
            ring = feat["geometry"]["coordinates"][0]
            assert ring[0] == ring[-1]  # closed
            area = sum(ring[i][0] * ring[i + 1][1] - ring[i + 1][0] * ring[i][1]
                       for i in range(len(ring) - 1)) / 2.0
            assert area > 0  # counterclockwise exterior
            assert feat["properties"] == row.as_record()

    def test_missing_footprint_rejected(self, tmp_path):
        from floodtriage.errors import GeometryError
        with pytest.raises(GeometryError):
            write_geojson(sample_rows(), {}, tmp_path / "x.geojson")


class TestSummary:
    def test_equals_csv_resummation(self, tmp_path):
        rng = np.random.default_rng(3)
        rows = []
        for i in range(40):
            tier = int(rng.integers(1, 4))
            rows.append(OutputRow(
                f"CLM{i:05d}", f"P{i:05d}", 0.0, 0.0,
                float(rng.random()), float(rng.random()), 1.0, 0.5, 0.2,
                0.5, float(rng.random() * 1e5), tier, "RES1", 1, "2017-08-30"))
        csv_path = tmp_path / "triage.csv"
        write_triage_csv(rows, csv_path)
        write_summary(rows, [], None, inundated_cells=1234,
                      cell_area_m2=100.0, path=tmp_path / "summary.txt")
        text = (tmp_path / "summary.txt").read_text()

        # independent re-summation straight from the CSV bytes
        tier_loss = {1: 0.0, 2: 0.0, 3: 0.0}
        with open(csv_path, newline="") as fh:
            for rec in csv.DictReader(fh):
                tier_loss[int(rec["tier"])] += float(rec["expected_loss"])
        for tier in (1, 2, 3):
            assert f"{tier_loss[tier]:.6g}" in text
        assert f"{sum(tier_loss.values()):.6g}" in text
        assert "inundated_cells: 1234" in text
        assert f"{1234 * 100.0 / 1e6:.6g}" in text
