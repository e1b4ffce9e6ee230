"""DEM data model, run configuration and synthetic terrain.

Grids are stored row-major with row 0 the northernmost row and column 0 the
westernmost column. Elevations are 32-bit floats; everything accumulated from
them (skewed grids, viewshed areas) is 64-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

__all__ = [
    "Dem",
    "DemError",
    "GeoOrigin",
    "RunConfig",
    "VsGrid",
    "make_synthetic",
    "require_valid",
    "validate",
]

UNITS = ("m2", "km2")
SYNTHETIC_KINDS = ("flat", "ramp", "cone", "smoothed-noise")


class DemError(ValueError):
    """Raised when a grid violates the DEM invariants."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class GeoOrigin:
    """Georeference carried as opaque metadata (lower-left corner)."""

    easting: float = 0.0
    northing: float = 0.0
    zone: str = ""


def _readonly(values, dtype):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dem:
    """Rectangular elevation grid in meters.

    Construction does not enforce the invariants so that malformed grids can
    be inspected with :func:`validate`; the engines call
    :func:`require_valid` before touching the data.
    """

    values: np.ndarray
    cellsize: float = 10.0
    nodata: Optional[float] = None
    origin: GeoOrigin = field(default_factory=GeoOrigin)

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values, np.float32))
        object.__setattr__(self, "cellsize", float(self.cellsize))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    @property
    def dimy(self) -> int:
        return self.values.shape[0]

    @property
    def dimx(self) -> int:
        return self.values.shape[1] if self.values.ndim > 1 else 0

    @property
    def size(self) -> int:
        return int(self.values.size)

    def nodata_mask(self) -> np.ndarray:
        if self.nodata is None:
            return np.zeros(self.values.shape, dtype=bool)
        nd = np.float32(self.nodata)
        if np.isnan(nd):
            return np.isnan(self.values)
        return self.values == nd

    def with_values(self, values) -> "Dem":
        return Dem(values, self.cellsize, self.nodata, self.origin)


@dataclass(frozen=True)
class VsGrid:
    """Accumulated viewshed area per cell, same shape as the source DEM."""

    values: np.ndarray
    units: str = "m2"

    def __post_init__(self):
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}, got {self.units!r}")
        object.__setattr__(self, "values", _readonly(self.values, np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def to_units(self, units: str) -> "VsGrid":
        if units == self.units:
            return self
        if units == "km2":
            return VsGrid(self.values / 1e6, units)
        return VsGrid(self.values * 1e6, units)


@dataclass(frozen=True)
class RunConfig:
    """Parameters shared by the engine, the reference sweep and the CLI.

    ``ns`` counts sectors over the full circle; the engine processes
    ``ns // 2`` sector axes and scans each in both directions.
    ``max_distance`` is in meters and disabled when ``None``.
    """

    ns: int = 360
    h0: float = 1.5
    workers: int = 1
    max_distance: Optional[float] = None
    units: str = "m2"

    def __post_init__(self):
        problems = []
        if not isinstance(self.ns, (int, np.integer)) or self.ns < 2 or self.ns % 2:
            problems.append(f"ns must be an even integer >= 2, got {self.ns!r}")
        if not math.isfinite(self.h0) or self.h0 < 0:
            problems.append(f"h0 must be finite and >= 0, got {self.h0!r}")
        if not isinstance(self.workers, (int, np.integer)) or self.workers < 1:
            problems.append(f"workers must be an integer >= 1, got {self.workers!r}")
        if self.max_distance is not None and not self.max_distance > 0:
            problems.append(f"max_distance must be > 0 when set, got {self.max_distance!r}")
        if self.units not in UNITS:
            problems.append(f"units must be one of {UNITS}, got {self.units!r}")
        if problems:
            raise ValueError("; ".join(problems))


def validate(dem: Dem) -> list[str]:
    """Return every DEM invariant violation; an empty list means valid."""
    problems = []
    values = dem.values
    if values.ndim != 2:
        return [f"grid must be 2-D, got {values.ndim} dimension(s)"]
    dimy, dimx = values.shape
    if dimy < 2 or dimx < 2:
        problems.append(f"grid must be at least 2x2, got {dimy}x{dimx}")
    if not (math.isfinite(dem.cellsize) and dem.cellsize > 0):
        problems.append(f"cellsize must be finite and > 0, got {dem.cellsize!r}")
    bad = ~np.isfinite(values) & ~dem.nodata_mask()
    if bad.any():
        cells = np.argwhere(bad)
        shown = ", ".join(f"({i}, {j})" for i, j in cells[:10])
        more = f" and {len(cells) - 10} more" if len(cells) > 10 else ""
        problems.append(f"non-finite elevation at cell(s) {shown}{more}")
    return problems


def require_valid(dem: Dem, allow_nodata: bool = False) -> None:
    """Raise :class:`DemError` unless ``dem`` can be fed to the viewshed engines."""
    problems = validate(dem)
    if not allow_nodata and not problems:
        n_void = int(dem.nodata_mask().sum())
        if n_void:
            problems.append(
                f"{n_void} nodata cell(s) present; fill them first (sdem fill)"
            )
    if problems:
        raise DemError(problems)


def make_synthetic(
    kind: str,
    dimy: int,
    dimx: int,
    cellsize: float = 10.0,
    seed: int = 0,
    slope: float = 1.0,
    relief: float = 100.0,
    roughness: float = 0.0,
) -> Dem:
    """Deterministic test terrain.

    Parameters
    ----------
    kind : str
        ``flat`` (all zeros), ``ramp`` (``slope`` meters per cell increasing
        eastwards), ``cone`` (peak of height ``relief`` at the grid centre) or
        ``smoothed-noise`` (Gaussian-filtered white noise rescaled to
        ``[0, relief]``, seeded by ``seed``). ``roughness`` mixes in a
        cell-scale noise component relative to the smooth field.
    dimy, dimx : int
        Grid shape, both at least 2.
    """
    if dimy < 2 or dimx < 2:
        raise ValueError(f"synthetic grids must be at least 2x2, got {dimy}x{dimx}")
    if kind == "noise":
        kind = "smoothed-noise"
    if kind == "flat":
        values = np.zeros((dimy, dimx))
    elif kind == "ramp":
        values = np.broadcast_to(slope * np.arange(dimx, dtype=np.float64), (dimy, dimx))
    elif kind == "cone":
        ii, jj = np.mgrid[0:dimy, 0:dimx]
        ci, cj = (dimy - 1) / 2.0, (dimx - 1) / 2.0
        r = np.hypot(ii - ci, jj - cj)
        values = relief * np.clip(1.0 - r / max(ci, cj), 0.0, None)
    elif kind == "smoothed-noise":
        rng = np.random.default_rng(seed)
        field_ = ndimage.gaussian_filter(
            rng.standard_normal((dimy, dimx)), sigma=max(2.0, min(dimy, dimx) / 8.0), mode="reflect"
        )
        field_ /= field_.std() or 1.0
        if roughness:
            fine = ndimage.gaussian_filter(rng.standard_normal((dimy, dimx)), sigma=1.5, mode="reflect")
            field_ += roughness * fine / (fine.std() or 1.0)
        lo, hi = field_.min(), field_.max()
        values = relief * (field_ - lo) / ((hi - lo) or 1.0)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    return Dem(values, cellsize=cellsize)
