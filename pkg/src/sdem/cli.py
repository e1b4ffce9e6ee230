"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure (bad input file,
refused reference run, I/O error).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bench import format_reports, run_bench
from .dem import SYNTHETIC_KINDS, Dem, DemError, RunConfig, VsGrid, make_synthetic
from .engine import total_viewshed
from .gridio import AsciiGridError, fill_nodata, read_ascii_grid, write_ascii_grid, write_heatmap
from .oracle import ReferenceTooLarge, multi_viewshed, singular_viewshed, total_viewshed_reference

WORKERS_ENV = "SDEM_WORKERS"

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("sdem")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _dims(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        if len(parts) == 1:
            return int(parts[0]), int(parts[0])
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}")


def _pov(text: str) -> tuple[int, int]:
    try:
        i, j = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}") from None
    return i, j


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="ESRI ASCII grid")
    p.add_argument("--synthetic", choices=SYNTHETIC_KINDS + ("noise",), help="generate terrain instead of --input")
    p.add_argument("--size", type=_dims, default=(64, 64), help="synthetic grid size ROWSxCOLS (default 64x64)")
    p.add_argument("--cellsize", type=float, default=10.0, help="synthetic cell size in meters")
    p.add_argument("--seed", type=int, default=0, help="synthetic terrain seed")


def _add_run(p: argparse.ArgumentParser, ns_default=360) -> None:
    p.add_argument("--ns", type=int, default=ns_default, help=f"sectors over the full circle (default {ns_default})")
    p.add_argument("--height", type=float, default=1.5, help="observer height above ground in meters")
    p.add_argument("--max-distance", type=float, default=None, help="visibility range limit in meters")
    p.add_argument("--units", choices=("m2", "km2"), default="m2")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", help="output path (grid file, or image base name)")
    p.add_argument("--format", choices=("asc", "heatmap", "both"), default="asc")
    p.add_argument("--palette", choices=("gray", "blue-red"), default="blue-red")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdem", description="Total and singular viewshed computation on raster DEMs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("total", help="total viewshed with the sheared-grid engine")
    _add_input(p)
    _add_run(p)
    _add_output(p)
    p.add_argument("--workers", type=int, default=None, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    p.add_argument("--progress", action="store_true", help="report finished sectors on stderr")

    p = sub.add_parser("reference", help="total viewshed with the slow rotational sweep")
    _add_input(p)
    _add_run(p)
    _add_output(p)
    p.add_argument("--force", action="store_true", help="run even on grids above the size guard")

    p = sub.add_parser("single", help="viewshed area of one point of view")
    _add_input(p)
    _add_run(p)
    p.add_argument("--pov", type=_pov, required=True, help="observer cell ROW,COL")

    p = sub.add_parser("multi", help="viewsheds of the points listed in a file")
    _add_input(p)
    _add_run(p)
    _add_output(p)
    p.add_argument("--povs", required=True, help="text file with one 'ROW COL' pair per line")

    p = sub.add_parser("bench", help="time the engine over worker counts and sector counts")
    _add_input(p)
    p.add_argument("--ns", type=_int_list, default=[180], help="comma-separated sector counts")
    p.add_argument("--workers", type=_int_list, default=None, help="comma-separated worker counts")
    p.add_argument("--height", type=float, default=1.5)
    p.add_argument("--repeat", type=int, default=1, help="keep the best of N runs")
    p.add_argument("--output", help="write the report here instead of stdout")

    p = sub.add_parser("fill", help="replace nodata cells by their nearest populated neighbour")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    return parser


def _load(args) -> tuple[Dem, str]:
    if args.input and args.synthetic:
        raise UsageError("give either --input or --synthetic, not both")
    if args.input:
        return read_ascii_grid(args.input), Path(args.input).stem
    if args.synthetic:
        dimy, dimx = args.size
        dem = make_synthetic(args.synthetic, dimy, dimx, cellsize=args.cellsize, seed=args.seed)
        return dem, f"{args.synthetic}-{dimy}x{dimx}-s{args.seed}"
    raise UsageError("missing input: give --input FILE or --synthetic KIND")


def _workers(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return 1


def _emit(vs: VsGrid, dem: Dem, args) -> None:
    if not args.output:
        raise UsageError("--output is required")
    out = Path(args.output)
    if args.format in ("asc", "both"):
        write_ascii_grid(vs, out, like=dem)
    if args.format in ("heatmap", "both"):
        ext = ".pgm" if args.palette == "gray" else ".ppm"
        img = out if (args.format == "heatmap" and out.suffix in (".pgm", ".ppm")) else out.with_suffix(ext)
        write_heatmap(vs, img, palette=args.palette)


def _config(args, workers: int = 1) -> RunConfig:
    return RunConfig(ns=args.ns, h0=args.height, workers=workers, max_distance=args.max_distance, units=args.units)


def _read_povs(path: str) -> list[tuple[int, int]]:
    # AsciiGridError reuses the line-number diagnostics of the grid reader
    try:
        text = Path(path).read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise AsciiGridError(f"cannot read POV list: {exc}", None, None, path) from None
    povs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        parts = line.split()
        try:
            i, j = (int(t) for t in parts)
        except ValueError:
            raise AsciiGridError(f"expected 'ROW COL', got {line!r}", lineno, None, path) from None
        povs.append((i, j))
    return povs


def _cmd_total(args) -> int:
    dem, _ = _load(args)
    cfg = _config(args, _workers(args.workers))
    progress = None
    if args.progress:
        nsec = cfg.ns // 2
        done = [0]

        def report(k, seconds):
            done[0] += 1
            print(f"\rsector {done[0]}/{nsec}", end="" if done[0] < nsec else "\n", file=sys.stderr)

        progress = report

    vs = total_viewshed(dem, cfg, progress)
    _emit(vs, dem, args)
    return EXIT_OK


def _cmd_reference(args) -> int:
    dem, _ = _load(args)
    if not args.output:
        raise UsageError("--output is required")
    vs = total_viewshed_reference(dem, _config(args), force=args.force)
    _emit(vs, dem, args)
    return EXIT_OK


def _cmd_single(args) -> int:
    dem, _ = _load(args)
    cfg = _config(args)
    i, j = args.pov
    area = singular_viewshed(dem, i, j, cfg.h0, cfg.ns, cfg.max_distance)
    area = float(VsGrid([[area]], "m2").to_units(cfg.units).values[0, 0])
    print(f"{i} {j} {area!r} {cfg.units}")
    return EXIT_OK


def _cmd_multi(args) -> int:
    dem, _ = _load(args)
    cfg = _config(args)
    povs = _read_povs(args.povs)
    if not povs:
        raise AsciiGridError("POV list is empty", None, None, args.povs)
    grid, total = multi_viewshed(dem, povs, cfg.h0, cfg.ns, cfg.max_distance)
    grid = grid.to_units(cfg.units)
    if cfg.units == "km2":
        total /= 1e6
    for i, j in povs:
        print(f"{i} {j} {float(grid.values[i, j])!r}")
    print(f"total {total!r} {cfg.units}")
    if args.output:
        _emit(grid, dem, args)
    return EXIT_OK


def _cmd_bench(args) -> int:
    dem, name = _load(args)
    workers = args.workers or [_workers(None)]
    reports = run_bench(dem, name, args.ns, workers, h0=args.height, repeat=args.repeat)
    text = format_reports(reports)
    if args.output:
        Path(args.output).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_fill(args) -> int:
    dem = read_ascii_grid(args.input)
    write_ascii_grid(fill_nodata(dem), args.output)
    return EXIT_OK


_COMMANDS = {
    "total": _cmd_total,
    "reference": _cmd_reference,
    "single": _cmd_single,
    "multi": _cmd_multi,
    "bench": _cmd_bench,
    "fill": _cmd_fill,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sdem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReferenceTooLarge as exc:
        print(f"sdem reference: refused: {exc}; pass --force to run anyway", file=sys.stderr)
        return EXIT_RUNTIME
    except (AsciiGridError, DemError, OSError, ValueError) as exc:
        print(f"sdem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_cli())
