"""Raster file I/O: ESRI ASCII grid and a versioned little-endian binary.

The ASCII grid is the interchange format (square cells, 1e-6 round-trip);
the binary format ("ALTR", version 1) is lossless and carries the full
geotransform including the CRS label.

Binary layout (little-endian):
    magic       4 bytes  b"ALTR"
    version     u32
    dtype       u32      0 = float64, 1 = bool (u8 cells)
    n_rows      u32
    n_cols      u32
    origin_x    f64
    origin_y    f64
    pixel_size_x f64
    pixel_size_y f64
    has_nodata  u8
    nodata      f64
    crs_len     u32
    crs_label   crs_len bytes, utf-8
    cells       row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatMismatch, ParseError
from .raster import GeoTransform, Raster

MAGIC = b"ALTR"
VERSION = 1
_DTYPE_FLOAT64 = 0
_DTYPE_BOOL = 1

_ASCII_FIELDS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
_HEADER = struct.Struct("<4sIIII ddd d Bd I".replace(" ", ""))


def write_ascii(raster: Raster, path, nodata_value: float = -9999.0) -> None:
    """Write an ESRI ASCII grid. Requires square cells (north-up)."""
    tr = raster.transform
    if abs(tr.pixel_size_x - abs(tr.pixel_size_y)) > 1e-9:
        raise FormatMismatch("ASCII grid requires square cells")
    cells = raster.filled()
    cells = np.where(np.isnan(cells), nodata_value, cells)
    yll = min(tr.origin_y, tr.origin_y + tr.n_rows * tr.pixel_size_y)
    lines = [
        f"NCOLS {tr.n_cols}",
        f"NROWS {tr.n_rows}",
        f"XLLCORNER {tr.origin_x!r}",
        f"YLLCORNER {yll!r}",
        f"CELLSIZE {tr.pixel_size_x!r}",
        f"NODATA_VALUE {nodata_value!r}",
    ]
    body = "\n".join(" ".join(repr(float(v)) for v in row) for row in cells)
    Path(path).write_text("\n".join(lines) + "\n" + body + "\n")


def read_ascii(path, crs_label: str = "local") -> Raster:
    """Read an ESRI ASCII grid into a float raster (nodata becomes NaN)."""
    text = Path(path).read_text().split("\n")
    header = {}
    idx = 0
    for idx, line in enumerate(text):
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in _ASCII_FIELDS + ("nodata_value",):
            try:
                header[parts[0].lower()] = float(parts[1])
            except ValueError as exc:
                raise ParseError(f"bad value for header field {parts[0]!r}") from exc
        else:
            break
    for name in _ASCII_FIELDS:
        if name not in header:
            raise ParseError(f"missing ASCII grid header field {name.upper()}")
    n_cols = int(header["ncols"])
    n_rows = int(header["nrows"])
    cellsize = header["cellsize"]
    nodata = header.get("nodata_value")
    values = []
    for lineno, line in enumerate(text[idx:], idx + 1):
        if not line.strip():
            continue
        try:
            values.extend(float(v) for v in line.split())
        except ValueError as exc:
            raise ParseError(f"line {lineno}: non-numeric cell value") from exc
    if len(values) != n_rows * n_cols:
        raise ParseError(
            f"expected {n_rows * n_cols} cells, got {len(values)}"
        )
    cells = np.array(values).reshape(n_rows, n_cols)
    if nodata is not None:
        cells[cells == nodata] = np.nan
    tr = GeoTransform(
        origin_x=header["xllcorner"],
        origin_y=header["yllcorner"] + n_rows * cellsize,
        pixel_size_x=cellsize,
        pixel_size_y=-cellsize,
        n_rows=n_rows,
        n_cols=n_cols,
        crs_label=crs_label,
    )
    return Raster(tr, cells)


def write_binary(raster: Raster, path) -> None:
    """Write the versioned binary format (lossless round trip)."""
    tr = raster.transform
    if raster.cells.dtype == bool:
        dtype = _DTYPE_BOOL
        payload = raster.cells.astype(np.uint8).tobytes()
    else:
        dtype = _DTYPE_FLOAT64
        payload = raster.cells.astype("<f8").tobytes()
    has_nodata = raster.nodata is not None
    crs = tr.crs_label.encode("utf-8")
    header = _HEADER.pack(
        MAGIC, VERSION, dtype, tr.n_rows, tr.n_cols,
        tr.origin_x, tr.origin_y, tr.pixel_size_x, tr.pixel_size_y,
        int(has_nodata), raster.nodata if has_nodata else 0.0,
        len(crs),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(crs)
        fh.write(payload)


def read_binary(path) -> Raster:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError("file too short for binary raster header")
    (magic, version, dtype, n_rows, n_cols, ox, oy, psx, psy,
     has_nodata, nodata, crs_len) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatMismatch(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ParseError(f"unsupported binary raster version {version}")
    offset = _HEADER.size
    crs_label = data[offset : offset + crs_len].decode("utf-8")
    offset += crs_len
    n = n_rows * n_cols
    if dtype == _DTYPE_BOOL:
        cells = np.frombuffer(data, dtype=np.uint8, count=n, offset=offset)
        cells = cells.astype(bool).reshape(n_rows, n_cols)
    elif dtype == _DTYPE_FLOAT64:
        cells = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
        cells = cells.reshape(n_rows, n_cols).copy()
    else:
        raise ParseError(f"unknown dtype code {dtype}")
    tr = GeoTransform(ox, oy, psx, psy, n_rows, n_cols, crs_label)
    return Raster(tr, cells, nodata if has_nodata else None)


def read_raster(path) -> Raster:
    """Dispatch on content: binary magic first, ASCII grid otherwise."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_binary(path)
    return read_ascii(path)


def write_raster(raster: Raster, path) -> None:
    """Dispatch on suffix: .asc/.txt write ASCII, everything else binary."""
    if Path(path).suffix.lower() in (".asc", ".txt"):
        write_ascii(raster, path)
    else:
        write_binary(raster, path)
