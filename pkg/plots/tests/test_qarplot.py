import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qarplot import FigureSpec, PlotDataError, load_scan, pivot_grid, render
from qarplot.data import filter_rows, region_boundary_segments


@pytest.fixture(scope="module")
def bmr_csv(tmp_path_factory):
    """Small weak-coupling scan produced through the simulator CLI."""
    path = tmp_path_factory.mktemp("scans") / "bmr.csv"
    cmd = [
        sys.executable, "-m", "qarsim.cli", "scan", "--method", "bmr",
        "--grid", "lambda=0.5:4:8,delta=0.02:0.98:25", "--out", str(path), "--quiet",
    ]
    subprocess.run(cmd, check=True, capture_output=True)
    return path


@pytest.fixture(scope="module")
def converge_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("scans") / "conv.csv"
    cmd = [
        sys.executable, "-m", "qarsim.cli", "converge", "--m-list", "2,3",
        "--delta", "0.2", "--grid", "lambda=0.5:2:4", "--out", str(path),
    ]
    subprocess.run(cmd, check=True, capture_output=True)
    return path


def test_loader_and_grid(bmr_csv):
    rows = load_scan(bmr_csv)
    assert len(rows) == 8 * 25
    grid = pivot_grid(rows)
    assert grid.j_c.shape == (25, 8)
    assert not grid.mask.any()
    # cooling below the window edge, none above
    below = grid.j_c[grid.delta < 0.38, :]
    above = grid.j_c[grid.delta > 0.42, :]
    assert (below > 0).all() and (above < 0).all()


def test_bmr_boundary_is_single_vertical_line(bmr_csv):
    """All region-boundary segments sit on the delta = 0.4 midline."""
    grid = pivot_grid(load_scan(bmr_csv))
    segments = region_boundary_segments(grid)
    assert segments
    xs = {round(0.5 * (a[0] + b[0]), 9) for a, b in segments}
    assert len(xs) == 1
    assert abs(next(iter(xs)) - 0.4) <= 0.021
    # the line is vertical (constant x) and spans the lambda range
    for (x0, y0), (x1, y1) in segments:
        assert x0 == x1
    ys = sorted(y for seg in segments for y in (seg[0][1], seg[1][1]))
    assert ys[0] < grid.lam[0] and ys[-1] > grid.lam[-1]


def test_contour_determinism(bmr_csv, tmp_path):
    spec = FigureSpec(inputs=(str(bmr_csv),), kind="contour")
    out1 = render(spec, tmp_path / "a.svg")
    out2 = render(spec, tmp_path / "b.svg")
    b1, b2 = out1.read_bytes(), out2.read_bytes()
    assert b1 == b2
    assert b1.startswith(b"<?xml")
    assert (tmp_path / "a.png").exists()  # raster preview alongside


def test_pdf_determinism(bmr_csv, tmp_path):
    spec = FigureSpec(inputs=(str(bmr_csv),), kind="contour")
    b1 = render(spec, tmp_path / "a.pdf").read_bytes()
    b2 = render(spec, tmp_path / "b.pdf").read_bytes()
    assert b1 == b2


def test_masked_cells(tmp_path, bmr_csv):
    # flip one row to a failed point and check it gets masked
    lines = Path(bmr_csv).read_text().splitlines()
    parts = lines[1].split(",")
    parts[4] = parts[5] = parts[6] = parts[7] = ""
    parts[8] = ""
    parts[10] = "false"
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join([lines[0], ",".join(parts)] + lines[2:]) + "\n")
    grid = pivot_grid(load_scan(bad))
    assert grid.mask.sum() == 1
    render(FigureSpec(inputs=(str(bad),), kind="contour"), tmp_path / "masked.svg")


def test_cut_overlay(bmr_csv, tmp_path):
    out = render(
        FigureSpec(inputs=(str(bmr_csv),), kind="cut", fixed={"delta": 0.22}),
        tmp_path / "cut.svg",
    )
    assert out.exists()
    with pytest.raises(PlotDataError):
        render(
            FigureSpec(inputs=(str(bmr_csv),), kind="cut", fixed={"delta": 2.0}),
            tmp_path / "nope.svg",
        )
    assert not (tmp_path / "nope.svg").exists()


def test_cop_parametric(bmr_csv, tmp_path):
    out = render(
        FigureSpec(inputs=(str(bmr_csv),), kind="cop-parametric", fixed={"lambda": 2.0}),
        tmp_path / "cop.svg",
    )
    assert out.exists()


def test_convergence_plot(converge_csv, tmp_path):
    out = render(FigureSpec(inputs=(str(converge_csv),), kind="convergence"),
                 tmp_path / "conv.svg")
    assert out.exists()


def test_empty_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(PlotDataError):
        render(FigureSpec(inputs=(str(empty),), kind="contour"), tmp_path / "x.svg")
    assert not (tmp_path / "x.svg").exists()

    header_only = tmp_path / "header.csv"
    header_only.write_text(
        "lambda,delta,method,M,j_c,j_h,j_w,cop,region,residual,positivity_ok\n"
    )
    with pytest.raises(PlotDataError):
        render(FigureSpec(inputs=(str(header_only),), kind="contour"), tmp_path / "y.svg")


def test_missing_columns_error(tmp_path):
    bad = tmp_path / "cols.csv"
    bad.write_text("lambda,delta\n1,0.2\n")
    with pytest.raises(PlotDataError):
        load_scan(bad)


def test_filter_rows_method():
    rows = [{"method": "bmr", "delta": 0.2, "lambda": 1.0}]
    with pytest.raises(PlotDataError):
        filter_rows(rows, method="rc")


def test_cli_end_to_end(bmr_csv, tmp_path):
    out = tmp_path / "cli.svg"
    proc = subprocess.run(
        [sys.executable, "-m", "qarplot.cli", "--kind", "contour",
         "--in", str(bmr_csv), "--out", str(out)],
        capture_output=True,
    )
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run(
        [sys.executable, "-m", "qarplot.cli", "--kind", "cut",
         "--in", str(bmr_csv), "--out", str(tmp_path / "z.svg"), "--fix", "delta=2.0"],
        capture_output=True,
    )
    assert proc.returncode == 1
    assert b"error:" in proc.stderr
