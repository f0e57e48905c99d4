"""Deterministic figures from refrigerator scan CSVs."""

from .data import PlotDataError, load_scan, pivot_grid, region_boundary_segments
from .figures import KINDS, FigureSpec, render

__version__ = "0.1.0"
