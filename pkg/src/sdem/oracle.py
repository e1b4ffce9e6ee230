"""Classic rotational-sweep viewshed in unskewed grid space.

Slow but simple; it is the ground truth the sheared engine is checked
against. Rays advance one cell per step along their dominant axis; the
sample at each step lies exactly on the ray, its elevation interpolated
linearly between the two cells it falls between on the minor axis (DDA
style). Distances are Euclidean in cells, and visibility uses the same
strict elevation-angle test as the engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .dem import Dem, RunConfig, VsGrid, require_valid

__all__ = [
    "REFERENCE_MAX_CELLS",
    "AxisStep",
    "ReferenceTooLarge",
    "RingSectorSet",
    "multi_viewshed",
    "ray_offsets",
    "ring_sectors",
    "select_axis_point_set",
    "singular_viewshed",
    "total_viewshed_reference",
]

REFERENCE_MAX_CELLS = 65536


class ReferenceTooLarge(ValueError):
    pass


@dataclass
class RingSectorSet:
    """Visible ``(r_open, r_close)`` pairs of one scan, in cells."""

    pairs: list[tuple[float, float]] = field(default_factory=list)

    def add(self, r_open: float, r_close: float) -> None:
        self.pairs.append((r_open, r_close))

    def measure(self) -> float:
        return sum(r_close * r_close - r_open * r_open for r_open, r_close in self.pairs)

    def is_well_formed(self) -> bool:
        prev = 0.0
        for r_open, r_close in self.pairs:
            if not (prev <= r_open < r_close) or r_open <= 0:
                return False
            prev = r_close
        return True


_SNAP = 1e-9


@dataclass(frozen=True)
class AxisStep:
    """Sample ``n`` steps from the observer, as offsets from its cell.

    The sample reads cell ``(di, dj)`` with weight ``1 - frac`` and the next
    cell along the minor axis, ``(di + ui, dj + uj)``, with weight ``frac``.
    """

    n: int
    di: int
    dj: int
    ui: int
    uj: int
    frac: float
    dist: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.di + self.ui * self.frac, self.dj + self.uj * self.frac)


def _split(y: float) -> tuple[int, float]:
    yr = round(y)
    if abs(y - yr) <= _SNAP * max(1.0, abs(y)):
        return int(yr), 0.0
    a = math.floor(y)
    return a, y - a


def ray_offsets(s: float, forward: bool, nmax: int) -> list[AxisStep]:
    """Steps ``1..nmax`` along the ray at ``s`` degrees from the +column axis towards +row."""
    sign = 1.0 if forward else -1.0
    di = sign * math.sin(math.radians(s))
    dj = sign * math.cos(math.radians(s))
    j_major = abs(dj) >= abs(di)
    if j_major:
        slope, step = di / abs(dj), (1 if dj > 0 else -1)
    else:
        slope, step = dj / abs(di), (1 if di > 0 else -1)
    stride = math.sqrt(1.0 + slope * slope)
    out = []
    for n in range(1, nmax + 1):
        a, frac = _split(n * slope)
        if j_major:
            out.append(AxisStep(n, a, n * step, 1, 0, frac, n * stride))
        else:
            out.append(AxisStep(n, n * step, a, 0, 1, frac, n * stride))
    return out


def _inside(dimy, dimx, i, j):
    return 0 <= i < dimy and 0 <= j < dimx


def _sample(values, i0, j0, st: AxisStep):
    """Interpolated elevation of a step, or ``None`` once it leaves the grid."""
    dimy, dimx = values.shape
    i, j = i0 + st.di, j0 + st.dj
    if not _inside(dimy, dimx, i, j):
        return None
    if st.frac == 0.0:
        return float(values[i, j])
    i2, j2 = i + st.ui, j + st.uj
    if not _inside(dimy, dimx, i2, j2):
        return None
    return (1.0 - st.frac) * float(values[i, j]) + st.frac * float(values[i2, j2])


def select_axis_point_set(dem: Dem, pov: tuple[int, int], s: float, forward: bool = True):
    """Sample positions ``(row, col)`` on the ray from ``pov``, nearest first.

    One sample per unit step along the dominant axis, up to and including
    the last one whose interpolation cells are inside the grid. The minor
    coordinate is fractional unless the ray passes through cell centres.
    """
    dimy, dimx = dem.shape
    i0, j0 = pov
    if not _inside(dimy, dimx, i0, j0):
        raise ValueError(f"point of view {pov} outside {dimy}x{dimx} grid")
    points = []
    for st in ray_offsets(s, forward, max(dimy, dimx)):
        if _sample(dem.values, i0, j0, st) is None:
            break
        di, dj = st.position
        points.append((i0 + di, j0 + dj))
    return points


def ring_sectors(dem: Dem, pov, s: float, h0: float, forward: bool = True) -> RingSectorSet:
    """Visible ring sectors of one scan, evaluated in plain Python."""
    i0, j0 = pov
    if not _inside(dem.dimy, dem.dimx, i0, j0):
        raise ValueError(f"point of view {pov} outside {dem.dimy}x{dem.dimx} grid")
    h = float(dem.values[i0, j0]) + h0
    rings = RingSectorSet()
    visible, max_theta, dist0 = False, -math.inf, 0.0
    for st in ray_offsets(s, forward, max(dem.shape) + 1):
        z = _sample(dem.values, i0, j0, st)
        if z is None:
            if visible:
                rings.add(dist0, st.dist)
            break
        theta = (z - h) / st.dist
        prev = visible
        visible = theta > max_theta
        max_theta = max(theta, max_theta)
        if visible and not prev:
            dist0 = st.dist
        if prev and not visible:
            rings.add(dist0, st.dist)
    return rings


def _offset_tables(ns: int, nmax: int):
    """Step tables for the ``ns`` scan directions (axis k forward, then backward)."""
    shape = (ns, nmax + 1)
    tables = {
        name: np.empty(shape, dtype=np.int64) for name in ("di", "dj", "ui", "uj")
    }
    frac = np.empty(shape)
    dist = np.empty(shape)
    d = 0
    for k in range(ns // 2):
        s = k * 360.0 / ns
        for forward in (True, False):
            for n, st in enumerate(ray_offsets(s, forward, nmax + 1)):
                tables["di"][d, n] = st.di
                tables["dj"][d, n] = st.dj
                tables["ui"][d, n] = st.ui
                tables["uj"][d, n] = st.uj
                frac[d, n] = st.frac
                dist[d, n] = st.dist
            d += 1
    return tables["di"], tables["dj"], tables["ui"], tables["uj"], frac, dist


@nb.njit(cache=True, nogil=True)
def _pov_cv(values, i0, j0, h, di, dj, ui, uj, frac, dist, max_dist):
    dimy, dimx = values.shape
    total = 0.0
    for d in range(di.shape[0]):
        visible = False
        max_theta = -np.inf
        dist0 = 0.0
        n = 0
        while True:
            ti = i0 + di[d, n]
            tj = j0 + dj[d, n]
            f = frac[d, n]
            r = dist[d, n]
            if ti < 0 or ti >= dimy or tj < 0 or tj >= dimx or r > max_dist:
                break
            z = values[ti, tj]
            if f > 0.0:
                ti2 = ti + ui[d, n]
                tj2 = tj + uj[d, n]
                if ti2 >= dimy or tj2 >= dimx:
                    break
                z = (1.0 - f) * z + f * values[ti2, tj2]
            theta = (z - h) / r
            prev = visible
            visible = theta > max_theta
            if visible:
                max_theta = theta
            if visible and not prev:
                dist0 = r
            if prev and not visible:
                total += r * r - dist0 * dist0
            n += 1
        if visible:
            # the first step past the range closes the open ring
            r = dist[d, n]
            total += r * r - dist0 * dist0
    return total


@nb.njit(cache=True, nogil=True)
def _all_cv(values, h0, di, dj, ui, uj, frac, dist, max_dist, out):
    dimy, dimx = values.shape
    for i in range(dimy):
        for j in range(dimx):
            out[i, j] = _pov_cv(values, i, j, values[i, j] + h0, di, dj, ui, uj, frac, dist, max_dist)


def _cell_limit(max_distance, cellsize):
    return math.inf if max_distance is None else max_distance / cellsize


def _scale(cv, ns, cellsize):
    return cv * (math.pi / ns) * cellsize * cellsize


def _check_pov(dem: Dem, i0: int, j0: int):
    if not (0 <= i0 < dem.dimy and 0 <= j0 < dem.dimx):
        raise ValueError(f"point of view ({i0}, {j0}) outside {dem.dimy}x{dem.dimx} grid")


def singular_viewshed(
    dem: Dem, i0: int, j0: int, h0: float = 1.5, ns: int = 360, max_distance: float | None = None
) -> float:
    """Visible area in square meters from cell ``(i0, j0)`` at ``h0`` above ground."""
    require_valid(dem)
    _check_pov(dem, i0, j0)
    RunConfig(ns=ns, h0=h0, max_distance=max_distance)
    values = dem.values.astype(np.float64)
    tables = _offset_tables(ns, max(dem.shape))
    cv = _pov_cv(values, i0, j0, values[i0, j0] + h0, *tables, _cell_limit(max_distance, dem.cellsize))
    return float(_scale(np.float64(cv), ns, dem.cellsize))


def multi_viewshed(dem: Dem, povs, h0: float = 1.5, ns: int = 360, max_distance: float | None = None):
    """Per-POV singular viewsheds and their sum.

    Returns ``(grid, total)`` where ``grid`` holds each POV's area at its cell
    (repeated POVs accumulate) and zero elsewhere.
    """
    povs = [(int(i), int(j)) for i, j in povs]
    for i, j in povs:
        _check_pov(dem, i, j)
    grid = np.zeros(dem.shape)
    total = 0.0
    for i, j in povs:
        area = singular_viewshed(dem, i, j, h0, ns, max_distance)
        grid[i, j] += area
        total += area
    return VsGrid(grid, "m2"), total


def total_viewshed_reference(dem: Dem, cfg: RunConfig | None = None, force: bool = False) -> VsGrid:
    """Singular viewshed of every cell; cost grows as ``ns * N**1.5``."""
    cfg = cfg or RunConfig()
    require_valid(dem)
    if dem.size > REFERENCE_MAX_CELLS and not force:
        raise ReferenceTooLarge(
            f"reference sweep on {dem.dimy}x{dem.dimx} = {dem.size} cells scans about "
            f"{cfg.ns * dem.size * max(dem.shape) / 2:.3g} targets (cost ~ ns * N^1.5); "
            f"limit is {REFERENCE_MAX_CELLS} cells without force"
        )
    values = dem.values.astype(np.float64)
    tables = _offset_tables(cfg.ns, max(dem.shape))
    cv = np.empty(dem.shape)
    _all_cv(values, float(cfg.h0), *tables, _cell_limit(cfg.max_distance, dem.cellsize), cv)
    return VsGrid(_scale(cv, cfg.ns, dem.cellsize), "m2").to_units(cfg.units)
