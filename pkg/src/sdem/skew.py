"""Per-sector shear of a DEM so that every band of sight becomes one row.

A sector axis at angle ``s`` (degrees, measured from the +column axis towards
the +row axis) is first mapped into the 0-45 degree domain by transposing
and/or flipping the grid. The grid is then sheared column by column: column
``j`` moves up by ``tan(s) * j`` rows, split linearly between the two
destination rows it straddles. Every row of the resulting ``2*rows x cols``
grid samples one straight line of the sector's family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "FULL_WEIGHT_TOL",
    "SectorPlan",
    "SkwGrid",
    "apply_pre_ops",
    "build_skw",
    "invert_pre_ops",
    "plan_sector",
    "sector_angle",
    "shear_params",
    "shear_table",
    "shear_tan",
    "unskew_accumulate",
]

FULL_WEIGHT_TOL = 1e-6
_SNAP = 1e-9

TRANSPOSE = "transpose"
FLIP_ROWS = "flip-rows"
FLIP_COLS = "flip-cols"


@dataclass(frozen=True)
class SectorPlan:
    sector_index: int
    ns: int
    angle: float
    angle_s: float
    pre_ops: tuple[str, ...]
    shear_dims: tuple[int, int]

    @property
    def tan_s(self) -> float:
        return shear_tan(self.angle_s)

    @property
    def correction(self) -> float:
        """Squared stretch of one skewed-row step, ``1 / cos(angle_s)**2``."""
        t = self.tan_s
        return 1.0 + t * t


@dataclass
class SkwGrid:
    """Sheared grid for one sector.

    ``first[p]``/``last[p]`` bound the half-open column interval of
    full-weight cells in row ``p``; empty rows have ``first == last``.
    """

    values: np.ndarray
    weights: np.ndarray
    first: np.ndarray
    last: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    @property
    def row_ranges(self) -> list[tuple[int, int]]:
        return list(zip(self.first.tolist(), self.last.tolist()))

    def full_mask(self) -> np.ndarray:
        return np.abs(self.weights - 1.0) <= FULL_WEIGHT_TOL


def sector_angle(k: int, ns: int) -> float:
    return k * 360.0 / ns


def plan_sector(k: int, ns: int, dims: tuple[int, int]) -> SectorPlan:
    """Reduce sector ``k`` of ``ns`` to a shear angle in [0, 45] degrees.

    The returned ``pre_ops`` are applied left to right to the DEM before
    shearing; :func:`invert_pre_ops` undoes them.
    """
    if ns < 2 or ns % 2:
        raise ValueError(f"ns must be an even integer >= 2, got {ns}")
    if not 0 <= k < ns // 2:
        raise ValueError(f"sector index {k} outside [0, {ns // 2})")
    s = sector_angle(k, ns)
    rows, cols = dims
    if s <= 45.0:
        ops, reduced = (), s
    elif s <= 90.0:
        ops, reduced = (TRANSPOSE,), 90.0 - s
    elif s <= 135.0:
        ops, reduced = (TRANSPOSE, FLIP_ROWS), s - 90.0
    else:
        ops, reduced = (FLIP_COLS,), 180.0 - s
    shear_dims = (cols, rows) if TRANSPOSE in ops else (rows, cols)
    return SectorPlan(k, ns, s, reduced, ops, shear_dims)


def apply_pre_ops(grid: np.ndarray, pre_ops) -> np.ndarray:
    """View of ``grid`` with ``pre_ops`` applied in order (no copy)."""
    for op in pre_ops:
        grid = _apply_op(grid, op)
    return grid


def invert_pre_ops(grid: np.ndarray, pre_ops) -> np.ndarray:
    # every op is an involution, so undo them in reverse order
    for op in reversed(tuple(pre_ops)):
        grid = _apply_op(grid, op)
    return grid


def _apply_op(grid, op):
    if op == TRANSPOSE:
        return grid.T
    if op == FLIP_ROWS:
        return grid[::-1, :]
    if op == FLIP_COLS:
        return grid[:, ::-1]
    raise ValueError(f"unknown axis transform {op!r}")


def shear_tan(angle_s: float) -> float:
    """``tan(angle_s)`` snapped to an integer when within rounding noise (45 -> 1)."""
    if not 0.0 <= angle_s <= 45.0 + 1e-9:
        raise ValueError(f"shear angle must lie in [0, 45] degrees, got {angle_s}")
    t = math.tan(math.radians(angle_s))
    if abs(t - round(t)) < 1e-12:
        t = float(round(t))
    return t


def _split(y: float) -> tuple[int, float]:
    yr = round(y)
    if abs(y - yr) <= _SNAP * max(1.0, abs(y)):
        return int(yr), 0.0
    dest = math.floor(y)
    return dest, y - dest


def shear_params(angle_s: float, j: int) -> tuple[int, float]:
    """Destination row offset and interpolation fraction for column ``j``."""
    return _split(shear_tan(angle_s) * j)


def shear_table(tan_s: float, cols: int) -> tuple[np.ndarray, np.ndarray]:
    dest = np.empty(cols, dtype=np.int64)
    frac = np.empty(cols, dtype=np.float64)
    for j in range(cols):
        dest[j], frac[j] = _split(tan_s * j)
    return dest, frac


@nb.njit(cache=True, nogil=True)
def _shear_into(grid, dest, frac, values, weights):
    rows, cols = grid.shape
    values[:] = 0.0
    weights[:] = 0.0
    for i in range(rows):
        for j in range(cols):
            p = rows + i - dest[j]
            r = frac[j]
            v = np.float64(grid[i, j])
            values[p, j] += (1.0 - r) * v
            values[p - 1, j] += r * v
            weights[p, j] += 1.0 - r
            weights[p - 1, j] += r


@nb.njit(cache=True, nogil=True)
def _full_ranges(weights, tol, first, last):
    nrows, cols = weights.shape
    for p in range(nrows):
        lo = -1
        hi = -1
        for j in range(cols):
            if abs(weights[p, j] - 1.0) <= tol:
                if lo < 0:
                    lo = j
                hi = j + 1
        if lo < 0:
            first[p] = 0
            last[p] = 0
        else:
            first[p] = lo
            last[p] = hi


def build_skw(grid: np.ndarray, angle_s: float, out: SkwGrid | None = None) -> SkwGrid:
    """Shear ``grid`` (already in pre-op orientation) by ``angle_s`` degrees.

    ``out`` may be a previously built grid of the same shape whose buffers
    are overwritten.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("grid must be 2-D")
    rows, cols = grid.shape
    dest, frac = shear_table(shear_tan(angle_s), cols)
    if out is None or out.values.shape != (2 * rows, cols):
        out = SkwGrid(
            np.empty((2 * rows, cols)),
            np.empty((2 * rows, cols)),
            np.empty(2 * rows, dtype=np.int64),
            np.empty(2 * rows, dtype=np.int64),
        )
    _shear_into(grid, dest, frac, out.values, out.weights)
    _full_ranges(out.weights, FULL_WEIGHT_TOL, out.first, out.last)
    return out


@nb.njit(cache=True, nogil=True)
def _unskew_into(skw_vs, dest, frac, first, last, use_ranges, out):
    rows, cols = out.shape
    for i in range(rows):
        for j in range(cols):
            p = rows + i - dest[j]
            r = frac[j]
            a = skw_vs[p, j]
            b = skw_vs[p - 1, j]
            if use_ranges:
                a_ok = first[p] <= j and j < last[p]
                b_ok = first[p - 1] <= j and j < last[p - 1]
                if a_ok and b_ok:
                    out[i, j] += (1.0 - r) * a + r * b
                elif a_ok:
                    out[i, j] += a
                elif b_ok:
                    out[i, j] += b
            else:
                out[i, j] += (1.0 - r) * a + r * b


def unskew_accumulate(
    skw_vs: np.ndarray,
    angle_s: float,
    plan: SectorPlan,
    out: np.ndarray,
    ranges: tuple[np.ndarray, np.ndarray] | None = None,
    scratch: np.ndarray | None = None,
) -> np.ndarray:
    """Add the inverse shear of ``skw_vs`` into ``out`` (DEM orientation).

    Each DEM cell reads the two skewed cells it was split into, weighted by
    the same fractions used by :func:`build_skw`. When ``ranges`` (the
    ``first``/``last`` arrays of the matching :class:`SkwGrid`) is given,
    a partner cell outside the full-weight interval is dropped and the
    remaining one taken whole, so border cells are not diluted by the
    implicit zeros around the sheared grid.
    """
    rows, cols = plan.shear_dims
    if skw_vs.shape != (2 * rows, cols):
        raise ValueError(f"skewed grid has shape {skw_vs.shape}, expected {(2 * rows, cols)}")
    if apply_pre_ops(out, plan.pre_ops).shape != (rows, cols):
        raise ValueError(f"output grid has shape {out.shape}, incompatible with plan {plan.shear_dims}")
    dest, frac = shear_table(shear_tan(angle_s), cols)
    if scratch is None:
        scratch = np.zeros((rows, cols))
    else:
        scratch[:] = 0.0
    if ranges is None:
        empty = np.zeros(0, dtype=np.int64)
        _unskew_into(skw_vs, dest, frac, empty, empty, False, scratch)
    else:
        _unskew_into(skw_vs, dest, frac, ranges[0], ranges[1], True, scratch)
    out += invert_pre_ops(scratch, plan.pre_ops)
    return out
