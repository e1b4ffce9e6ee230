"""ESRI ASCII grid reading/writing, heatmap images and nodata filling.

Header grammar (keys case-insensitive, in this order)::

    ncols         <int>
    nrows         <int>
    xllcorner     <float>     (or xllcenter)
    yllcorner     <float>     (or yllcenter)
    cellsize      <float>
    NODATA_value  <float>     (optional)

followed by ``nrows`` lines of ``ncols`` numbers, northernmost row first.
"""
from __future__ import annotations

import math
import os
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from .dem import Dem, DemError, GeoOrigin, VsGrid

__all__ = [
    "AsciiGridError",
    "fill_nodata",
    "parse_ascii_grid",
    "read_ascii_grid",
    "write_ascii_grid",
    "write_heatmap",
]

PathLike = Union[str, "os.PathLike[str]"]

_HEADER = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
_ALIASES = {"xllcenter": "xllcorner", "yllcenter": "yllcorner"}
_F32_MAX = float(np.finfo(np.float32).max)


class AsciiGridError(ValueError):
    """Malformed grid file; ``line``/``column`` are 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None, source: str = ""):
        self.line = line
        self.column = column
        self.source = source
        where = source or "<grid>"
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


def _number(token: str, line: int, col: int, source: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise AsciiGridError(f"non-numeric value {token!r}", line, col, source) from None
    return value


def parse_ascii_grid(text: str, source: str = "") -> Dem:
    """Parse the contents of an ASCII grid file."""
    lines = text.splitlines()
    header: dict[str, float] = {}
    centered = set()
    pos = 0

    def next_header_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            return None, None
        pos += 1
        return pos, lines[pos - 1].split()

    for key in _HEADER:
        lineno, parts = next_header_line()
        if parts is None:
            raise AsciiGridError(f"missing header key {key!r}", None, None, source)
        name = parts[0].lower()
        canonical = _ALIASES.get(name, name)
        if canonical != key:
            raise AsciiGridError(f"missing header key {key!r} (found {parts[0][:40]!r})", lineno, 1, source)
        if len(parts) != 2:
            raise AsciiGridError(f"header key {key!r} needs exactly one value", lineno, None, source)
        if name != canonical:
            centered.add(canonical)
        header[key] = _number(parts[1], lineno, 2, source)

    # optional NODATA_value
    nodata = None
    save = pos
    lineno, parts = next_header_line()
    if parts is not None and parts[0].lower() == "nodata_value":
        if len(parts) != 2:
            raise AsciiGridError("header key 'NODATA_value' needs exactly one value", lineno, None, source)
        nodata = _number(parts[1], lineno, 2, source)
    else:
        pos = save

    ncols, nrows, cellsize = header["ncols"], header["nrows"], header["cellsize"]
    for key, value in (("ncols", ncols), ("nrows", nrows)):
        if not (math.isfinite(value) and value == int(value) and value >= 1):
            raise AsciiGridError(f"{key} must be a positive integer, got {value!r}", None, None, source)
    if not (math.isfinite(cellsize) and cellsize > 0):
        raise AsciiGridError(f"cellsize must be a positive number, got {cellsize!r}", None, None, source)
    ncols, nrows = int(ncols), int(nrows)

    if nrows > len(lines) - pos:
        raise AsciiGridError(
            f"expected nrows={nrows} data rows, file has only {len(lines) - pos} more lines", None, None, source
        )
    rows: list[list[float]] = []
    nodata32 = None if nodata is None else np.float32(nodata)
    while pos < len(lines):
        lineno = pos + 1
        parts = lines[pos].split()
        pos += 1
        if not parts:
            continue
        if len(rows) >= nrows:
            raise AsciiGridError(f"more than nrows={nrows} data rows", lineno, None, source)
        if len(parts) != ncols:
            raise AsciiGridError(f"expected {ncols} values, found {len(parts)}", lineno, None, source)
        out = []
        for col, token in enumerate(parts):
            v = _number(token, lineno, col + 1, source)
            if nodata32 is not None and (np.float32(v) == nodata32 or (math.isnan(v) and np.isnan(nodata32))):
                out.append(float(nodata32))
                continue
            if not math.isfinite(v) or abs(v) > _F32_MAX:
                raise AsciiGridError(f"value {token!r} is not a finite 32-bit number", lineno, col + 1, source)
            out.append(v)
        rows.append(out)
    if len(rows) != nrows:
        raise AsciiGridError(f"expected nrows={nrows} data rows, found {len(rows)}", None, None, source)
    values = np.array(rows, dtype=np.float32)

    xll, yll = header["xllcorner"], header["yllcorner"]
    if "xllcorner" in centered:
        xll -= cellsize / 2.0
    if "yllcorner" in centered:
        yll -= cellsize / 2.0
    return Dem(values, cellsize=cellsize, nodata=nodata, origin=GeoOrigin(xll, yll))


def read_ascii_grid(path: PathLike) -> Dem:
    """Read an ESRI ASCII grid. Every failure is an :class:`AsciiGridError`."""
    source = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise AsciiGridError(f"cannot read file: {exc.strerror or exc}", None, None, source) from None
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        raise AsciiGridError("file is not ASCII text", line, None, source) from None
    return parse_ascii_grid(text, source)


def _format(values: np.ndarray) -> str:
    return "\n".join(" ".join(f"{v:.9g}" for v in row) for row in values.tolist()) + "\n"


def write_ascii_grid(
    grid: Union[Dem, VsGrid],
    path: PathLike,
    units: Optional[str] = None,
    like: Optional[Dem] = None,
) -> None:
    """Write a DEM or viewshed grid.

    Viewshed grids are converted to ``units`` first and take their header
    (cell size, origin) from ``like`` when given.
    """
    if isinstance(grid, Dem):
        values = grid.values
        cellsize, origin, nodata = grid.cellsize, grid.origin, grid.nodata
    else:
        if units is not None:
            grid = grid.to_units(units)
        values = grid.values
        cellsize = like.cellsize if like is not None else 1.0
        origin = like.origin if like is not None else GeoOrigin()
        nodata = None
    nrows, ncols = values.shape
    header = [
        f"ncols         {ncols}",
        f"nrows         {nrows}",
        f"xllcorner     {float(origin.easting)!r}",
        f"yllcorner     {float(origin.northing)!r}",
        f"cellsize      {float(cellsize)!r}",
    ]
    if nodata is not None:
        header.append(f"NODATA_value  {nodata:.9g}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        fh.write(_format(values))


def _normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(values.shape)
    return (values - lo) / (hi - lo)


def write_heatmap(grid: Union[VsGrid, np.ndarray], path: PathLike, palette: str = "gray") -> None:
    """Min-max normalised 8-bit image: PGM for ``gray``, PPM for ``blue-red``.

    ``blue-red`` runs from blue (minimum) to red (maximum).
    """
    values = np.asarray(grid.values if isinstance(grid, VsGrid) else grid, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise ValueError("heatmap needs a non-empty 2-D grid")
    if not np.isfinite(values).all():
        raise ValueError("heatmap needs finite values")
    t = _normalize(values)
    h, w = values.shape
    if palette == "gray":
        pixels = np.rint(t * 255).astype(np.uint8)
        magic = b"P5"
    elif palette == "blue-red":
        level = np.rint(t * 255).astype(np.uint8)
        pixels = np.zeros((h, w, 3), dtype=np.uint8)
        pixels[..., 0] = level
        pixels[..., 2] = 255 - level
        magic = b"P6"
    else:
        raise ValueError(f"unknown palette {palette!r}; expected 'gray' or 'blue-red'")
    with open(path, "wb") as fh:
        fh.write(magic + f"\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def fill_nodata(dem: Dem) -> Dem:
    """Replace nodata cells by the value of the nearest populated cell."""
    mask = dem.nodata_mask()
    if not mask.any():
        return dem
    if mask.all():
        raise DemError(["grid has no populated cells to fill from"])
    _, (ii, jj) = ndimage.distance_transform_edt(mask, return_indices=True)
    filled = dem.values[ii, jj]
    return Dem(filled, cellsize=dem.cellsize, nodata=dem.nodata, origin=dem.origin)
