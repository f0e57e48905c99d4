"""Command-line interface.

Subcommands: steady-state (one point), scan (grid to CSV), converge
(truncation sweep to CSV), window (effective cooling predicate to CSV).
Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

from . import analysis
from .config import ConfigError, load_config, parse_grid_option, parse_range
from .redfield import NonUniqueSteadyState, SolverFailure


def _add_common(p: argparse.ArgumentParser, methods=True):
    if methods:
        p.add_argument("--method", choices=analysis.METHODS, default="rc")
    p.add_argument("--config", metavar="FILE", help="INI parameter file")
    p.add_argument("--m", type=int, help="oscillator levels kept per mode")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qarsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady-state", help="solve one operating point")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)

    p = sub.add_parser("scan", help="solve a (lambda, delta) grid and write CSV")
    _add_common(p)
    p.add_argument("--grid", help="override, e.g. lambda=0.05:12:60,delta=0.02:0.98:49")
    p.add_argument("--out", required=True, metavar="CSV")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("converge", help="truncation sweep of the cooling current")
    _add_common(p, methods=False)
    p.add_argument("--m-list", default="4,5,6", help="comma-separated truncations")
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--grid", help="lambda grid override, e.g. lambda=0.5:12:24")
    p.add_argument("--out", required=True, metavar="CSV")

    p = sub.add_parser("window", help="effective cooling window along lambda")
    _add_common(p, methods=False)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--grid", help="lambda grid override")
    p.add_argument("--out", required=True, metavar="CSV")
    return ap


def _configure(args):
    cfg, grid = load_config(args.config)
    if getattr(args, "m", None):
        cfg = cfg.with_m(args.m)
    if getattr(args, "grid", None):
        grid = parse_grid_option(args.grid, grid)
    if getattr(args, "delta", None) is not None and args.command != "steady-state":
        cfg = cfg.with_delta(args.delta)
    return cfg, grid


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, grid = _configure(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "steady-state":
            point = cfg.with_coupling(args.lam).with_delta(args.delta)
            res, broken = analysis.solve_point(args.method, point)
            region = analysis.classify_region(res.j_c, res.j_w, broken)
            print(f"method    {args.method}")
            print(f"lambda    {args.lam:g}")
            print(f"delta     {args.delta:g}")
            print(f"j_c       {res.j_c:.12g}")
            print(f"j_h       {res.j_h:.12g}")
            print(f"j_w       {res.j_w:.12g}")
            print(f"cop       {'' if res.cop is None else f'{res.cop:.12g}'}")
            print(f"region    {region}")
            print(f"residual  {res.residual_rel:.3e}")
            return 0

        if args.command == "scan":
            progress = None
            if not args.quiet:
                def progress(done, total):
                    if done % 50 == 0 or done == total:
                        print(f"\r{done}/{total} points", end="", file=sys.stderr)
                        if done == total:
                            print(file=sys.stderr)
            table = analysis.scan_grid(args.method, grid.lam, grid.delta, cfg, progress=progress)
            table.to_csv(args.out)
            failed = sum(1 for p in table if not p.solved)
            if failed:
                print(f"warning: {failed} grid points failed", file=sys.stderr)
            return 0

        if args.command == "converge":
            try:
                m_list = [int(x) for x in args.m_list.split(",")]
            except ValueError as exc:
                print(f"config error: bad --m-list: {exc}", file=sys.stderr)
                return 2
            records = analysis.convergence_sweep(m_list, cfg, grid.lam)
            analysis.write_convergence_csv(records, args.out)
            return 0

        if args.command == "window":
            rows = analysis.cooling_window_table(cfg, grid.lam)
            analysis.write_window_csv(rows, args.out)
            return 0

    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverFailure, NonUniqueSteadyState) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
