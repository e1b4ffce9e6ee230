"""Benchmark harness: timed total-viewshed runs and key: value reports."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .dem import Dem, RunConfig, make_synthetic
from .engine import total_viewshed_detailed

__all__ = ["BenchReport", "format_reports", "parse_reports", "run_bench"]


@dataclass
class BenchReport:
    """One timed run.

    Phase times (``skew_seconds``, ``scan_seconds``, ``unskew_seconds``) are
    per-sector times summed over all sectors and divided by the worker
    count, i.e. the wall-clock share each worker spent in that phase.
    ``reduce_seconds`` is measured on the reducing thread and
    ``wall_seconds`` covers the whole run. Throughput counts one POV per cell
    and sector axis, over the scan phase.
    """

    dataset: str
    dimy: int
    dimx: int
    ns: int
    workers: int
    skew_seconds: float
    scan_seconds: float
    unskew_seconds: float
    reduce_seconds: float
    wall_seconds: float
    povs_per_second: float
    speedup: float = 1.0

    @staticmethod
    def throughput(dimy: int, dimx: int, ns: int, scan_seconds: float) -> float:
        return dimy * dimx * (ns // 2) / scan_seconds if scan_seconds > 0 else float("inf")

    def to_text(self) -> str:
        return "\n".join(f"{f.name}: {_fmt(getattr(self, f.name))}" for f in dataclasses.fields(self))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


_TYPES = {f.name: f.type for f in dataclasses.fields(BenchReport)}


def format_reports(reports: Iterable[BenchReport]) -> str:
    """Reports as blocks of ``key: value`` lines separated by blank lines."""
    return "\n\n".join(r.to_text() for r in reports) + "\n"


def parse_reports(text: str) -> list[BenchReport]:
    reports = []
    for block in text.strip().split("\n\n"):
        fields = {}
        for line in block.strip().splitlines():
            key, _, value = line.partition(":")
            key, value = key.strip(), value.strip()
            if key not in _TYPES:
                raise ValueError(f"unknown bench report key {key!r}")
            kind = _TYPES[key]
            fields[key] = int(value) if kind in (int, "int") else value if kind in (str, "str") else float(value)
        reports.append(BenchReport(**fields))
    return reports


def run_bench(
    dem: Dem,
    dataset: str = "dem",
    ns_values: Sequence[int] = (180,),
    worker_counts: Sequence[int] = (1,),
    h0: float = 1.5,
    baseline_seconds: Optional[float] = None,
    repeat: int = 1,
    warmup: bool = True,
) -> list[BenchReport]:
    """Time :func:`total_viewshed` for every ``(ns, workers)`` combination.

    Speed-up is relative to ``baseline_seconds`` when given, otherwise to the
    single-worker row of the same ``ns`` (or the first row when none exists).
    The best of ``repeat`` runs is kept. ``warmup`` runs a tiny grid first so
    that loading the compiled kernels is not charged to the first row.
    """
    if warmup:
        total_viewshed_detailed(make_synthetic("flat", 8, 8), RunConfig(ns=8, h0=h0))
    reports = []
    for ns in ns_values:
        rows = []
        for workers in worker_counts:
            cfg = RunConfig(ns=ns, h0=h0, workers=workers)
            best = None
            for _ in range(max(1, repeat)):
                res = total_viewshed_detailed(dem, cfg)
                if best is None or res.wall_time < best.wall_time:
                    best = res
            share = 1.0 / best.workers
            scan = best.phases.scan * share
            rows.append(
                BenchReport(
                    dataset=dataset,
                    dimy=dem.dimy,
                    dimx=dem.dimx,
                    ns=ns,
                    workers=workers,
                    skew_seconds=best.phases.skew * share,
                    scan_seconds=scan,
                    unskew_seconds=best.phases.unskew * share,
                    reduce_seconds=best.phases.reduce,
                    wall_seconds=best.wall_time,
                    povs_per_second=BenchReport.throughput(dem.dimy, dem.dimx, ns, scan),
                )
            )
        base = baseline_seconds
        if base is None:
            single = [r for r in rows if r.workers == 1]
            base = (single or rows)[0].wall_seconds
        for r in rows:
            r.speedup = base / r.wall_seconds if r.wall_seconds > 0 else float("inf")
        reports.extend(rows)
    return reports
