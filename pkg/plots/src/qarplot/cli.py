"""Command line: qarplot --kind contour --in scan.csv --out fig.svg [--fix delta=0.6]."""

from __future__ import annotations

import argparse
import sys

from .data import PlotDataError
from .figures import KINDS, FigureSpec, render


def _parse_fix(items):
    fixed = {}
    for item in items or []:
        if "=" not in item:
            raise PlotDataError(f"bad --fix {item!r}; expected axis=value")
        axis, value = item.split("=", 1)
        axis = axis.strip()
        if axis not in ("delta", "lambda"):
            raise PlotDataError(f"unknown axis {axis!r} in --fix")
        try:
            fixed[axis] = float(value)
        except ValueError as exc:
            raise PlotDataError(f"bad --fix value {value!r}: {exc}") from exc
    return fixed


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qarplot", description=__doc__)
    ap.add_argument("--kind", choices=KINDS, required=True)
    ap.add_argument("--in", dest="inputs", action="append", required=True,
                    metavar="CSV", help="input CSV (repeatable)")
    ap.add_argument("--out", required=True, metavar="FILE",
                    help="vector output (.svg or .pdf); a .png preview is written too")
    ap.add_argument("--fix", action="append", metavar="AXIS=VALUE",
                    help="pin delta or lambda (cuts, COP curves)")
    ap.add_argument("--method", choices=("bmr", "rc", "eff"))
    ap.add_argument("--title", default="")
    args = ap.parse_args(argv)

    try:
        spec = FigureSpec(
            inputs=tuple(args.inputs),
            kind=args.kind,
            fixed=_parse_fix(args.fix),
            method=args.method,
            title=args.title,
        )
        render(spec, args.out)
    except (PlotDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
