"""Loading and reshaping of scan CSV files.

The scan schema is fixed by the simulator:

    lambda,delta,method,M,j_c,j_h,j_w,cop,region,residual,positivity_ok

Rows with positivity_ok = false (or empty currents) are kept but masked.
All functions here are pure so the geometry they produce can be tested
without rendering anything.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

SCAN_COLUMNS = [
    "lambda", "delta", "method", "M", "j_c", "j_h", "j_w",
    "cop", "region", "residual", "positivity_ok",
]

REGION_CODES = {"": 0, "R1": 1, "R2": 2, "R3": 3, "R4": 4}


class PlotDataError(ValueError):
    """Input CSV cannot be turned into the requested figure."""


def _to_float(text: str) -> float:
    return float(text) if text else math.nan


def load_scan(path) -> list[dict]:
    """Read one scan CSV; raises on missing columns or an empty table."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotDataError(f"{path}: empty file")
        missing = [c for c in SCAN_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise PlotDataError(f"{path}: missing columns {missing}")
        rows = []
        for raw in reader:
            rows.append(
                {
                    "lambda": _to_float(raw["lambda"]),
                    "delta": _to_float(raw["delta"]),
                    "method": raw["method"],
                    "m": raw["M"],
                    "j_c": _to_float(raw["j_c"]),
                    "j_h": _to_float(raw["j_h"]),
                    "j_w": _to_float(raw["j_w"]),
                    "cop": _to_float(raw["cop"]),
                    "region": raw["region"],
                    "ok": raw["positivity_ok"] == "true",
                }
            )
    if not rows:
        raise PlotDataError(f"{path}: no data rows")
    return rows


def filter_rows(rows: list[dict], method: str | None = None, **fixed) -> list[dict]:
    """Select rows by method and by fixed axis values (within half a step)."""
    out = rows
    if method:
        out = [r for r in out if r["method"] == method]
        if not out:
            raise PlotDataError(f"no rows with method {method!r}")
    for axis, value in fixed.items():
        values = sorted({r[axis] for r in out})
        if not values:
            raise PlotDataError(f"no rows left to fix {axis}")
        nearest = min(values, key=lambda v: abs(v - value))
        steps = [b - a for a, b in zip(values, values[1:])]
        tol = 0.5 * min(steps) if steps else max(1e-9, 1e-9 * abs(nearest))
        if abs(nearest - value) > tol:
            raise PlotDataError(f"{axis} = {value} not present (nearest {nearest})")
        out = [r for r in out if r[axis] == nearest]
    if not out:
        raise PlotDataError("selection left no rows")
    return out


@dataclass(frozen=True)
class ScanGrid:
    lam: np.ndarray          # ascending lambda values
    delta: np.ndarray        # ascending delta values
    j_c: np.ndarray          # shape (n_delta, n_lambda)
    region: np.ndarray       # int codes, same shape
    mask: np.ndarray         # True where the cell is unusable


def pivot_grid(rows: list[dict]) -> ScanGrid:
    """Arrange scan rows on their (lambda, delta) grid."""
    lam = np.array(sorted({r["lambda"] for r in rows}))
    delta = np.array(sorted({r["delta"] for r in rows}))
    if lam.size < 2 or delta.size < 2:
        raise PlotDataError("contour needs at least a 2 x 2 grid")
    li = {v: i for i, v in enumerate(lam)}
    di = {v: i for i, v in enumerate(delta)}
    j_c = np.full((delta.size, lam.size), math.nan)
    region = np.zeros((delta.size, lam.size), dtype=int)
    mask = np.ones((delta.size, lam.size), dtype=bool)
    for r in rows:
        i, j = di[r["delta"]], li[r["lambda"]]
        j_c[i, j] = r["j_c"]
        region[i, j] = REGION_CODES.get(r["region"], 0)
        mask[i, j] = (not r["ok"]) or math.isnan(r["j_c"])
    return ScanGrid(lam=lam, delta=delta, j_c=j_c, region=region, mask=mask)


def region_boundary_segments(grid: ScanGrid, axis_order=("delta", "lam")):
    """Line segments separating cells with different region labels.

    Returns a list of ((x0, y0), (x1, y1)) pairs in data coordinates with
    x = the first axis of ``axis_order``.  Segments sit on midlines
    between neighbouring grid points.
    """
    if axis_order[0] == "delta":
        x_vals, y_vals = grid.delta, grid.lam
        code = grid.region  # already indexed [delta, lam]
    else:
        x_vals, y_vals = grid.lam, grid.delta
        code = grid.region.T
    segments = []

    def mid(vals, i):
        return 0.5 * (vals[i] + vals[i + 1])

    def edge(vals, i):
        if i < 0:
            return vals[0] - 0.5 * (vals[1] - vals[0])
        if i >= vals.size - 1:
            return vals[-1] + 0.5 * (vals[-1] - vals[-2])
        return mid(vals, i)

    nx, ny = x_vals.size, y_vals.size
    for ix in range(nx - 1):
        for iy in range(ny):
            if code[ix, iy] != code[ix + 1, iy]:
                x = mid(x_vals, ix)
                segments.append(((x, edge(y_vals, iy - 1)), (x, edge(y_vals, iy))))
    for ix in range(nx):
        for iy in range(ny - 1):
            if code[ix, iy] != code[ix, iy + 1]:
                y = mid(y_vals, iy)
                segments.append(((edge(x_vals, ix - 1), y), (edge(x_vals, ix), y)))
    return segments
