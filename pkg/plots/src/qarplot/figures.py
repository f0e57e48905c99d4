"""Figure rendering: contour maps, cuts, COP curves and convergence plots.

Rendering is deterministic: a fixed style, a fixed SVG hash salt and no
embedded timestamps, so re-rendering the same CSV gives byte-identical
vector output.  Cells flagged not-positive are masked out of the maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib import colors

from .data import (
    PlotDataError,
    filter_rows,
    load_scan,
    pivot_grid,
    region_boundary_segments,
)

KINDS = ("contour", "cut", "cop-parametric", "convergence")

_METHOD_STYLE = {
    "bmr": dict(color="#555555", ls="--", marker="^", ms=3),
    "rc": dict(color="#1f77b4", ls="-", marker="o", ms=3),
    "eff": dict(color="#d62728", ls=":", marker="s", ms=3),
}

_REGION_TINT = {1: "#bdbdbd", 2: "#ffd8a8", 4: "#d0bfff"}


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: inputs, figure kind and axis selections."""

    inputs: tuple
    kind: str
    fixed: dict = field(default_factory=dict)  # e.g. {"delta": 0.6}
    method: str | None = None
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotDataError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise PlotDataError("at least one input CSV is required")


def _deterministic_style():
    plt.rcdefaults()
    plt.rcParams.update(
        {
            "svg.hashsalt": "qarplot",
            "figure.figsize": (5.2, 3.9),
            "figure.dpi": 110,
            "font.size": 9.5,
            "axes.grid": True,
            "grid.alpha": 0.25,
        }
    )


def _save(fig, out_path: Path):
    out_path = Path(out_path)
    fig.savefig(out_path, metadata=_vector_metadata(out_path), bbox_inches="tight")
    preview = out_path.with_suffix(".png")
    fig.savefig(preview, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path


def _vector_metadata(path: Path):
    suffix = path.suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None}
    return None


def render(spec: FigureSpec, out_path) -> Path:
    """Render the figure; raises before writing anything on bad input."""
    _deterministic_style()
    if spec.kind == "contour":
        fig = _contour(spec)
    elif spec.kind == "cut":
        fig = _cut(spec)
    elif spec.kind == "cop-parametric":
        fig = _cop_parametric(spec)
    else:
        fig = _convergence(spec)
    return _save(fig, Path(out_path))


def _contour(spec: FigureSpec):
    rows = load_scan(spec.inputs[0])
    if spec.method:
        rows = filter_rows(rows, method=spec.method)
    grid = pivot_grid(rows)
    fig, ax = plt.subplots()

    # cooling current over (delta, lambda); delta on x so the weak-coupling
    # window edge appears as a vertical line at delta = 0.4
    z = np.ma.masked_array(grid.j_c, mask=grid.mask)
    vmax = float(np.max(np.abs(z))) or 1.0
    mesh = ax.pcolormesh(
        grid.delta,
        grid.lam,
        z.T,
        cmap="RdBu_r",
        norm=colors.SymLogNorm(linthresh=vmax * 1e-3, vmin=-vmax, vmax=vmax, base=10),
        shading="nearest",
    )
    mesh.cmap.set_bad("#e8e8e8")
    fig.colorbar(mesh, ax=ax, label="cooling current $j_c$")

    # tint the non-cooling regions and draw their boundaries
    for code, tint in _REGION_TINT.items():
        sel = np.ma.masked_array(
            np.ones_like(grid.j_c), mask=(grid.region != code) | grid.mask
        )
        ax.pcolormesh(
            grid.delta, grid.lam, sel.T,
            cmap=colors.ListedColormap([tint]), alpha=0.35, shading="nearest",
        )
    for (x0, y0), (x1, y1) in region_boundary_segments(grid):
        ax.plot([x0, x1], [y0, y1], color="black", lw=0.7, solid_capstyle="butt")

    ax.set_xlabel(r"level spacing $\Delta$")
    ax.set_ylabel(r"coupling $\lambda$")
    ax.set_title(spec.title or f"cooling map ({rows[0]['method']})")
    ax.grid(False)
    return fig


def _cut(spec: FigureSpec):
    if not spec.fixed:
        raise PlotDataError("cut figures need --fix delta=... or --fix lambda=...")
    axis, value = next(iter(spec.fixed.items()))
    free = "lambda" if axis == "delta" else "delta"
    fig, ax = plt.subplots()
    plotted = 0
    for path in spec.inputs:
        rows = load_scan(path)
        methods = [spec.method] if spec.method else sorted({r["method"] for r in rows})
        for meth in methods:
            try:
                sel = filter_rows(rows, method=meth, **{axis: value})
            except PlotDataError:
                continue
            sel = sorted(sel, key=lambda r: r[free])
            x = [r[free] for r in sel]
            y = [r["j_c"] for r in sel]
            ax.plot(x, y, label=meth, **_METHOD_STYLE.get(meth, {}))
            plotted += 1
    if not plotted:
        raise PlotDataError(f"no rows at {axis} = {value}")
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel(r"$\lambda$" if free == "lambda" else r"$\Delta$")
    ax.set_ylabel("cooling current $j_c$")
    sym = r"\Delta" if axis == "delta" else r"\lambda"
    ax.set_title(spec.title or f"cut at ${sym} = {value:g}$")
    ax.legend()
    return fig


def _cop_parametric(spec: FigureSpec):
    fig, ax = plt.subplots()
    plotted = 0
    for path in spec.inputs:
        rows = load_scan(path)
        methods = [spec.method] if spec.method else sorted({r["method"] for r in rows})
        for meth in methods:
            sel = [r for r in rows if r["method"] == meth]
            if spec.fixed:
                sel = filter_rows(sel, **spec.fixed)
            sel = [r for r in sel if np.isfinite(r["cop"]) and r["j_c"] > 0]
            if not sel:
                continue
            sel = sorted(sel, key=lambda r: r["delta"])
            ax.plot(
                [r["cop"] for r in sel],
                [r["j_c"] for r in sel],
                label=meth,
                **_METHOD_STYLE.get(meth, {}),
            )
            plotted += 1
    if not plotted:
        raise PlotDataError("no cooling rows with a defined COP")
    ax.set_xlabel("coefficient of performance $j_c/j_w$")
    ax.set_ylabel("cooling current $j_c$")
    ax.set_title(spec.title or "cooling current versus COP")
    ax.legend()
    return fig


def _convergence(spec: FigureSpec):
    """Truncation sweep: expects the converge CSV (m, lambda, delta, j_c, ...)."""
    import csv as _csv

    fig, ax = plt.subplots()
    plotted = 0
    for path in spec.inputs:
        with open(path, newline="") as fh:
            reader = _csv.DictReader(fh)
            need = {"m", "lambda", "j_c"}
            if reader.fieldnames is None or not need.issubset(reader.fieldnames):
                raise PlotDataError(f"{path}: expected a truncation-sweep CSV")
            rows = [
                {"m": int(r["m"]), "lambda": float(r["lambda"]), "j_c": float(r["j_c"])}
                for r in reader
            ]
        if not rows:
            raise PlotDataError(f"{path}: no data rows")
        for m in sorted({r["m"] for r in rows}):
            sel = sorted((r for r in rows if r["m"] == m), key=lambda r: r["lambda"])
            ax.plot(
                [r["lambda"] for r in sel],
                [r["j_c"] for r in sel],
                marker="o",
                ms=3,
                label=f"M = {m}",
            )
            plotted += 1
    if not plotted:
        raise PlotDataError("nothing to plot")
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("cooling current $j_c$")
    ax.set_title(spec.title or "truncation convergence")
    ax.legend()
    return fig
