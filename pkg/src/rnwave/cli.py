"""Command-line front end.

Subcommands::

    rnwave geometry-table   [--M 1 --Q 0 --rho-min -10 --rho-max 10 --n-points 201] [--out DIR]
    rnwave potentials-table --l 0 1 2 [grid flags] [--out DIR]
    rnwave evolve  --config run.txt [--out DIR]
    rnwave verify  --run DIR

Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import ReportConfig, background_checks, build_report
from .config import ConfigError, parse_config
from .csvio import atomic_write_text, format_table, read_table, write_table
from .evolution import EvolutionError, evolve
from .geometry import BracketError, SpacetimeParams, SupercriticalError, build_coordinate_map
from .potentials import PotentialTable

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
CONFIG_ECHO = "config.txt"
SERIES_FILE = "series.csv"
FAILED_SENTINEL = "FAILED"

log = logging.getLogger("rnwave")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--Q", type=float, default=0.0)
    p.add_argument("--rho-min", type=float, default=-10.0)
    p.add_argument("--rho-max", type=float, default=10.0)
    p.add_argument("--n-points", type=int, default=201)
    p.add_argument("--out", type=Path, default=None, help="output directory (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rnwave", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("geometry-table", help="r and F on a rho_* grid")
    _grid_args(g)
    p = sub.add_parser("potentials-table", help="potentials and trapping terms on a rho_* grid")
    _grid_args(p)
    p.add_argument("--l", type=int, nargs="+", default=[0], help="harmonic indices")
    e = sub.add_parser("evolve", help="run a configured evolution")
    e.add_argument("--config", type=Path, required=True)
    e.add_argument("--out", type=Path, default=Path("."), help="run directory (default: current)")
    v = sub.add_parser("verify", help="write report.json and report.txt for a finished run")
    v.add_argument("--run", type=Path, required=True)
    return parser


def _emit(out: Path | None, name: str, columns) -> None:
    if out is None:
        sys.stdout.write(format_table(columns))
        return
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / name, columns)


def _coordinate_map(args):
    params = SpacetimeParams(args.M, args.Q)
    return build_coordinate_map(params, args.rho_min, args.rho_max, args.n_points)


def cmd_geometry_table(args) -> int:
    cmap = _coordinate_map(args)
    _emit(args.out, "geometry.csv", {"rho_star": cmap.rho_star, "r": cmap.r, "F": cmap.F})
    return EXIT_OK


def cmd_potentials_table(args) -> int:
    cmap = _coordinate_map(args)
    table = PotentialTable.from_map(cmap)
    cols = {"rho_star": cmap.rho_star, "V": table.V, "V_L": table.V_L}
    for l in args.l:
        if l < 0:
            raise UsageError("--l values must be non-negative")
        cols[f"V_l{l}"] = table.V_l(l)
    cols.update({"trapV": table.trapping_V, "trapVL": table.trapping_VL})
    _emit(args.out, "potentials.csv", cols)
    return EXIT_OK


def cmd_evolve(args) -> int:
    text = args.config.read_text(encoding="utf-8")
    run = parse_config(text)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    sentinel = out / FAILED_SENTINEL
    if sentinel.exists():
        sentinel.unlink()
    atomic_write_text(out / CONFIG_ECHO, text)
    try:
        series = evolve(run.evolution, settings=run.settings)
        write_table(out / SERIES_FILE, series.columns())
    except BaseException as exc:
        (out / SERIES_FILE).unlink(missing_ok=True)
        atomic_write_text(sentinel, f"{type(exc).__name__}: {exc}\n")
        raise
    log.info("wrote %d snapshots to %s", len(series), out / SERIES_FILE)
    return EXIT_OK


def cmd_verify(args) -> int:
    rundir: Path = args.run
    series_path = rundir / SERIES_FILE
    cols = read_table(series_path) if series_path.exists() else None
    extra = {}
    echo = rundir / CONFIG_ECHO
    if echo.exists():
        run = parse_config(echo.read_text(encoding="utf-8"))
        l_max = max(m.l for m in run.evolution.modes)
        extra = background_checks(run.evolution.params, l_max=l_max)
        p = run.settings.p_list[0]
        cfg = ReportConfig(angular_p=p)
    else:
        cfg = ReportConfig()
    report = build_report(cols, cfg, extra)
    atomic_write_text(rundir / "report.json", report.to_json())
    atomic_write_text(rundir / "report.txt", report.to_text())
    sys.stdout.write(report.to_text())
    return EXIT_OK


COMMANDS = {
    "geometry-table": cmd_geometry_table,
    "potentials-table": cmd_potentials_table,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"rnwave: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, SupercriticalError, ValueError, FileNotFoundError) as exc:
        print(f"rnwave: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EvolutionError, BracketError, RuntimeError, ArithmeticError, OSError) as exc:
        print(f"rnwave: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
