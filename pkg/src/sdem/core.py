"""Linear viewsheds along skewed rows and ring-sector area accounting.

A scan walks away from the observer cell along its row. A target is visible
when its elevation angle ``(elev - h) / d`` strictly exceeds every angle seen
before it on the scan. Each maximal run of visible targets opening at
distance ``r`` and closing (first hidden target) at ``R`` contributes
``R**2 - r**2``; a run still open when the scan leaves the valid range closes
at one step past the last target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .skew import SkwGrid, shear_tan

__all__ = [
    "LinearScanState",
    "area_scale",
    "linear_viewshed_row",
    "max_steps",
    "sector_cv",
    "sector_viewshed",
    "trace_linear_viewshed",
]

NO_LIMIT = 1 << 62


@dataclass(frozen=True)
class LinearScanState:
    """Scan state after visiting one target."""

    dd: int
    theta: float
    visible: bool
    max_theta: float
    open_dd: int
    cv: float


@nb.njit(cache=True, nogil=True)
def _scan(row, first, last, j0, h, step, max_dd):
    cv = 0.0
    visible = False
    max_theta = -np.inf
    open_dd = 0.0
    dd = 0.0
    n = 0
    k = j0 + step
    while k >= first and k < last and n < max_dd:
        n += 1
        dd = float(n)
        theta = (row[k] - h) / dd
        above = theta > max_theta
        if above:
            if not visible:
                open_dd = dd
            max_theta = theta
        elif visible:
            cv += dd * dd - open_dd * open_dd
        visible = above
        k += step
    if visible:
        end = dd + 1.0
        cv += end * end - open_dd * open_dd
    return cv


@nb.njit(cache=True, nogil=True)
def _sector_kernel(values, first, last, h0, correction, max_dd, out):
    nrows = values.shape[0]
    out[:] = 0.0
    for p in range(nrows):
        lo = first[p]
        hi = last[p]
        row = values[p]
        for j in range(lo, hi):
            h = row[j] + h0
            cv = _scan(row, lo, hi, j, h, 1, max_dd) + _scan(row, lo, hi, j, h, -1, max_dd)
            out[p, j] = cv * correction


@nb.njit(cache=True, nogil=True)
def _sector_cv_kernel(values, first, last, h0, step, max_dd, out):
    nrows = values.shape[0]
    out[:] = 0.0
    for p in range(nrows):
        lo = first[p]
        hi = last[p]
        row = values[p]
        for j in range(lo, hi):
            out[p, j] = _scan(row, lo, hi, j, row[j] + h0, step, max_dd)


def _steps(forward: bool) -> int:
    return 1 if forward else -1


def max_steps(max_distance: float | None, cellsize: float, angle_s: float) -> int:
    """Number of skewed-row steps that stay within ``max_distance`` meters."""
    if max_distance is None:
        return NO_LIMIT
    t = shear_tan(angle_s)
    return int(math.floor(max_distance / (cellsize * math.sqrt(1.0 + t * t)) + 1e-12))


def linear_viewshed_row(
    row,
    first: int,
    last: int,
    j0: int,
    h: float,
    forward: bool = True,
    max_dd: int | None = None,
) -> float:
    """Sum of ``R**2 - r**2`` (squared cells) over visible runs of one scan.

    ``row[first:last]`` is the valid range and ``j0`` the observer column;
    ``h`` is the absolute observer height.
    """
    row = np.ascontiguousarray(row, dtype=np.float64)
    if not first <= j0 < last:
        raise ValueError(f"observer column {j0} outside valid range [{first}, {last})")
    limit = NO_LIMIT if max_dd is None else int(max_dd)
    return _scan(row, int(first), int(last), int(j0), float(h), _steps(forward), limit)


def trace_linear_viewshed(row, first, last, j0, h, forward=True):
    """Plain-Python walk of one scan.

    Returns ``(states, cv)`` where ``states`` holds the state after each
    target and ``cv`` includes the end-of-range close. Independent of the
    compiled kernel; used to check it.
    """
    step = _steps(forward)
    visible, max_theta, open_dd, cv = False, -math.inf, 0, 0.0
    states = []
    k, dd = j0 + step, 0
    while first <= k < last:
        dd += 1
        theta = (float(row[k]) - h) / dd
        above = theta > max_theta
        if above and not visible:
            open_dd = dd
        if not above and visible:
            cv += dd * dd - open_dd * open_dd
        visible = above
        max_theta = max(theta, max_theta)
        states.append(LinearScanState(dd, theta, visible, max_theta, open_dd, cv))
        k += step
    if visible:
        cv += (dd + 1) ** 2 - open_dd * open_dd
    return states, cv


def sector_viewshed(
    skw: SkwGrid,
    angle_s: float,
    h0: float,
    max_dd: int | None = None,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Forward plus backward scan from every full-weight cell of ``skw``.

    Returns the skewed viewshed grid in squared cells, already multiplied by
    the ``1 / cos(angle_s)**2`` stretch of one skewed step. Cells outside the
    full-weight intervals are 0.
    """
    t = shear_tan(angle_s)
    if out is None:
        out = np.empty(skw.values.shape)
    limit = NO_LIMIT if max_dd is None else int(max_dd)
    _sector_kernel(skw.values, skw.first, skw.last, float(h0), 1.0 + t * t, limit, out)
    return out


def sector_cv(skw: SkwGrid, h0: float, forward: bool = True, max_dd: int | None = None) -> np.ndarray:
    """Uncorrected single-direction ``cv`` for every full-weight cell."""
    out = np.empty(skw.values.shape)
    limit = NO_LIMIT if max_dd is None else int(max_dd)
    _sector_cv_kernel(skw.values, skw.first, skw.last, float(h0), _steps(forward), limit, out)
    return out


def area_scale(cv_sum, ns: int, cellsize: float):
    """Convert summed ``R**2 - r**2`` over ``ns`` sector scans into square meters."""
    if ns < 2:
        raise ValueError(f"ns must be >= 2, got {ns}")
    if not cellsize > 0:
        raise ValueError(f"cellsize must be > 0, got {cellsize}")
    return cv_sum * (math.pi / ns) * cellsize * cellsize
