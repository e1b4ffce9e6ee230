"""Total viewshed over all sectors with a thread pool and ordered reduction.

Sectors are handed out dynamically to worker threads. The compiled kernels
release the GIL, so threads run truly in parallel. Each worker keeps its own
skewed buffers for its whole lifetime. Per-sector contributions are summed
by the calling thread strictly in ascending sector order, which makes the
result bitwise independent of the worker count and of completion order.
"""
from __future__ import annotations

import logging
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .core import area_scale, max_steps, sector_viewshed
from .dem import Dem, RunConfig, VsGrid, require_valid
from .skew import SkwGrid, apply_pre_ops, build_skw, plan_sector, unskew_accumulate

__all__ = [
    "PhaseTimes",
    "SectorResult",
    "SweepResult",
    "reduce_ordered",
    "sector_sweep",
    "total_viewshed",
    "total_viewshed_detailed",
]

log = logging.getLogger(__name__)

ProgressCallback = Callable[[int, float], None]


@dataclass
class PhaseTimes:
    skew: float = 0.0
    scan: float = 0.0
    unskew: float = 0.0
    reduce: float = 0.0

    def add(self, other: "PhaseTimes") -> None:
        self.skew += other.skew
        self.scan += other.scan
        self.unskew += other.unskew
        self.reduce += other.reduce


@dataclass
class SectorResult:
    """One sector's viewshed in DEM space, squared cells, before area scaling."""

    sector_index: int
    vs_contribution: np.ndarray
    wall_time: float
    phases: PhaseTimes = field(default_factory=PhaseTimes)


@dataclass
class SweepResult:
    vs: VsGrid
    accumulator: np.ndarray
    phases: PhaseTimes
    wall_time: float
    sectors: int
    workers: int


class _Workspace:
    """Scratch buffers owned by one worker thread."""

    def __init__(self):
        self.skw: Optional[SkwGrid] = None
        self.skw_vs: Optional[np.ndarray] = None
        self.scratch: Optional[np.ndarray] = None

    def buffers(self, rows, cols):
        if self.skw_vs is None or self.skw_vs.shape != (2 * rows, cols):
            self.skw_vs = np.empty((2 * rows, cols))
            self.scratch = np.empty((rows, cols))
        return self.skw_vs, self.scratch


def _run_sector(dem: Dem, cfg: RunConfig, k: int, ws: _Workspace, out: np.ndarray) -> SectorResult:
    t0 = time.perf_counter()
    plan = plan_sector(k, cfg.ns, dem.shape)
    rows, cols = plan.shear_dims
    skw_vs, scratch = ws.buffers(rows, cols)
    grid = np.ascontiguousarray(apply_pre_ops(dem.values, plan.pre_ops))
    ws.skw = build_skw(grid, plan.angle_s, out=ws.skw)
    t1 = time.perf_counter()
    sector_viewshed(
        ws.skw, plan.angle_s, cfg.h0, max_steps(cfg.max_distance, dem.cellsize, plan.angle_s), out=skw_vs
    )
    t2 = time.perf_counter()
    out[:] = 0.0
    unskew_accumulate(skw_vs, plan.angle_s, plan, out, ranges=(ws.skw.first, ws.skw.last), scratch=scratch)
    t3 = time.perf_counter()
    return SectorResult(k, out, t3 - t0, PhaseTimes(t1 - t0, t2 - t1, t3 - t2))


def sector_sweep(dem: Dem, cfg: RunConfig, k: int) -> SectorResult:
    """Run the shear / scan / unshear pipeline for sector ``k`` alone."""
    require_valid(dem)
    if not 0 <= k < cfg.ns // 2:
        raise ValueError(f"sector index {k} outside [0, {cfg.ns // 2})")
    return _run_sector(dem, cfg, k, _Workspace(), np.empty(dem.shape))


def reduce_ordered(results: Iterable) -> np.ndarray:
    """Sum per-sector buffers in ascending sector index.

    ``results`` holds :class:`SectorResult` objects or ``(index, array)``
    pairs; their order in the iterable does not matter.
    """
    items = []
    for r in results:
        if isinstance(r, SectorResult):
            items.append((r.sector_index, r.vs_contribution))
        else:
            idx, arr = r
            items.append((idx, np.asarray(arr)))
    if not items:
        raise ValueError("nothing to reduce")
    items.sort(key=lambda item: item[0])
    shape = items[0][1].shape
    acc = np.zeros(shape)
    for idx, arr in items:
        if arr.shape != shape:
            raise ValueError(f"buffer for sector {idx} has shape {arr.shape}, expected {shape}")
        acc += arr
    return acc


def total_viewshed_detailed(
    dem: Dem, cfg: RunConfig, progress: Optional[ProgressCallback] = None
) -> SweepResult:
    """Total viewshed plus timing breakdown; see :func:`total_viewshed`."""
    require_valid(dem)
    nsec = cfg.ns // 2
    workers = max(1, min(int(cfg.workers), nsec))
    t_start = time.perf_counter()
    acc = np.zeros(dem.shape)
    phases = PhaseTimes()

    local = threading.local()
    pool_lock = threading.Lock()
    free: list[np.ndarray] = []

    def take_buffer():
        with pool_lock:
            if free:
                return free.pop()
        return np.empty(dem.shape)

    def task(k):
        ws = getattr(local, "ws", None)
        if ws is None:
            ws = local.ws = _Workspace()
        return _run_sector(dem, cfg, k, ws, take_buffer())

    def consume(res: SectorResult):
        t0 = time.perf_counter()
        np.add(acc, res.vs_contribution, out=acc)
        phases.add(res.phases)
        phases.reduce += time.perf_counter() - t0
        with pool_lock:
            free.append(res.vs_contribution)
        if progress is not None:
            progress(res.sector_index, res.wall_time)

    if workers == 1:
        ws = _Workspace()
        buf = np.empty(dem.shape)
        for k in range(nsec):
            consume(_run_sector(dem, cfg, k, ws, buf))
    else:
        # bounded look-ahead keeps the number of live contribution buffers small
        window = 2 * workers
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sdem") as pool:
            pending: deque = deque()
            next_k = 0
            while next_k < nsec or pending:
                while next_k < nsec and len(pending) < window:
                    pending.append(pool.submit(task, next_k))
                    next_k += 1
                consume(pending.popleft().result())

    vs = VsGrid(area_scale(acc, cfg.ns, dem.cellsize), "m2").to_units(cfg.units)
    wall = time.perf_counter() - t_start
    log.debug("total viewshed %s ns=%d workers=%d in %.3fs", dem.shape, cfg.ns, workers, wall)
    return SweepResult(vs, acc, phases, wall, nsec, workers)


def total_viewshed(dem: Dem, cfg: RunConfig, progress: Optional[ProgressCallback] = None) -> VsGrid:
    """Viewshed area of every DEM cell taken as observer.

    Sector axes ``k = 0 .. ns/2 - 1`` at ``k * 360 / ns`` degrees are each
    scanned in both directions, covering the full circle once.
    """
    return total_viewshed_detailed(dem, cfg, progress).vs
