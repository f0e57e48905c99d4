"""Solver orchestration: single points, grid scans, regions, COP, convergence.

Operating regions over the (lam, delta) plane:

    R3  cooling, j_c > 0
    R1  no cooling and j_w < 0 (heat only leaves the hot bath)
    R2  no cooling, j_w > 0, level ordering intact (work-to-cold leakage)
    R4  no cooling, j_w > 0, level ordering broken

Scans record one CSV row per grid point and never abort on a failed
point; failures are kept with empty current fields and a flag.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .effective import build_converged_effective_model, eff_steady_state
from .model import COLD, HOT, WORK, QarConfig
from .rcmap import S_COLD, S_HOT, S_WORK, build_extended_hamiltonian, diagonalize
from .redfield import (
    DissipatorSpec,
    NonUniqueSteadyState,
    SolverFailure,
    SteadyStateResult,
    build_generator,
    solve_steady_state,
)

METHODS = ("bmr", "rc", "eff")
DEAD_BAND = 1e-14

CSV_HEADER = "lambda,delta,method,M,j_c,j_h,j_w,cop,region,residual,positivity_ok"


def classify_region(j_c: float, j_w: float, level_order_broken: bool) -> str:
    """Label an operating point; currents inside the dead band count as negative."""
    cooling = j_c > DEAD_BAND
    pumping = j_w > DEAD_BAND
    if cooling:
        return "R3"
    if not pumping:
        return "R1"
    return "R4" if level_order_broken else "R2"


def cop(j_c: float, j_w: float) -> float | None:
    """Coefficient of performance j_c / j_w; undefined unless j_w > 0."""
    if j_w <= 0.0:
        return None
    return j_c / j_w


def carnot_cop(beta_c: float, beta_h: float, beta_w: float) -> float:
    """Reversible bound (beta_h - beta_w) / (beta_c - beta_w) on the COP."""
    return (beta_h - beta_w) / (beta_c - beta_w)


# ---------------------------------------------------------------------------
# Single-point solvers
# ---------------------------------------------------------------------------

def _bmr_generator(cfg: QarConfig):
    """Weak-coupling generator on the bare 3-level system."""
    energies = np.array([cfg.levels.eps1, cfg.levels.eps2, cfg.levels.eps3])
    specs = [
        DissipatorSpec(cfg.cold, S_COLD),
        DissipatorSpec(cfg.hot, S_HOT),
        DissipatorSpec(cfg.work, S_WORK),
    ]
    return build_generator(energies, specs, zero_tol=1e-9 * max(1.0, cfg.cold.omega))


def _rc_generator(cfg: QarConfig):
    """Strong-coupling generator on the mapped extended system."""
    from .model import OhmicBath

    eig = diagonalize(build_extended_hamiltonian(cfg))
    residual_baths = {
        COLD: OhmicBath(COLD, cfg.cold.temperature, gamma=cfg.cold.gamma, cutoff=cfg.cutoff_cold),
        HOT: cfg.hot,
        WORK: OhmicBath(WORK, cfg.work.temperature, gamma=cfg.work.gamma, cutoff=cfg.cutoff_work),
    }
    specs = [DissipatorSpec(residual_baths[lab], eig.couplings[lab]) for lab in (COLD, HOT, WORK)]
    gen = build_generator(
        eig.energies,
        specs,
        zero_tol=1e-9 * max(1.0, cfg.cold.omega),
        state_parity=eig.parity,
    )
    even = np.flatnonzero(eig.parity > 0)
    odd = np.flatnonzero(eig.parity < 0)
    broken = bool(eig.energies[odd[0]] < eig.energies[even[0]])
    return gen, broken


def solve_point(method: str, cfg: QarConfig) -> tuple[SteadyStateResult, bool]:
    """Steady state by the chosen method; returns (result, level_order_broken)."""
    if method == "bmr":
        return solve_steady_state(_bmr_generator(cfg)), False
    if method == "rc":
        if cfg.cold.lam <= 0.0 or cfg.work.lam <= 0.0:
            raise ValueError("the mapped solver needs lam > 0 (oscillator sectors decouple)")
        gen, broken = _rc_generator(cfg)
        return solve_steady_state(gen), broken
    if method == "eff":
        if cfg.cold.lam <= 0.0 or cfg.work.lam <= 0.0:
            raise ValueError("the effective solver needs lam > 0")
        model = build_converged_effective_model(cfg)
        return eff_steady_state(model, cfg), model.level_order_broken
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# Scan tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanPoint:
    lam: float
    delta: float
    method: str
    m: int
    j_c: float = math.nan
    j_h: float = math.nan
    j_w: float = math.nan
    cop: float | None = None
    region: str = ""
    residual: float = math.nan
    positivity_ok: bool = False
    error: str = ""

    @property
    def solved(self) -> bool:
        return not self.error


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.12g}"


class ScanTable:
    """Grid of solved points with a fixed CSV schema."""

    def __init__(self, points: list[ScanPoint]):
        self.points = list(points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            writer = csv.writer(fh)
            for p in self.points:
                writer.writerow(
                    [
                        _fmt(p.lam),
                        _fmt(p.delta),
                        p.method,
                        p.m,
                        _fmt(p.j_c),
                        _fmt(p.j_h),
                        _fmt(p.j_w),
                        _fmt(p.cop),
                        p.region,
                        _fmt(p.residual),
                        "true" if p.positivity_ok else "false",
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "ScanTable":
        points = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER.split(","):
                raise ValueError(f"unexpected CSV header in {path}")
            for row in reader:
                points.append(
                    ScanPoint(
                        lam=float(row["lambda"]),
                        delta=float(row["delta"]),
                        method=row["method"],
                        m=int(row["M"]),
                        j_c=float(row["j_c"]) if row["j_c"] else math.nan,
                        j_h=float(row["j_h"]) if row["j_h"] else math.nan,
                        j_w=float(row["j_w"]) if row["j_w"] else math.nan,
                        cop=float(row["cop"]) if row["cop"] else None,
                        region=row["region"],
                        residual=float(row["residual"]) if row["residual"] else math.nan,
                        positivity_ok=row["positivity_ok"] == "true",
                    )
                )
        return cls(points)


def default_lambda_grid() -> np.ndarray:
    return np.linspace(0.05, 12.0, 60)


def default_delta_grid() -> np.ndarray:
    return np.linspace(0.02, 0.98, 49)


def _scan_one(method: str, cfg: QarConfig, lam: float, delta: float) -> ScanPoint:
    point_cfg = cfg.with_coupling(lam).with_delta(delta)
    try:
        res, broken = solve_point(method, point_cfg)
    except (SolverFailure, NonUniqueSteadyState, ValueError, RuntimeError) as exc:
        return ScanPoint(lam=lam, delta=delta, method=method, m=cfg.m, error=str(exc))
    return ScanPoint(
        lam=lam,
        delta=delta,
        method=method,
        m=cfg.m,
        j_c=res.j_c,
        j_h=res.j_h,
        j_w=res.j_w,
        cop=cop(res.j_c, res.j_w),
        region=classify_region(res.j_c, res.j_w, broken),
        residual=res.residual_rel,
        positivity_ok=res.positivity_ok,
    )


def scan_grid(
    method: str, lam_grid, delta_grid, cfg: QarConfig, progress=None, workers: int = 1
) -> ScanTable:
    """Solve every (lam, delta) grid point; rows in delta-major order.

    Grids must be strictly increasing.  Failed points are recorded with a
    diagnostic instead of aborting the scan.  With ``workers`` > 1 the
    independent points run in a bounded process pool; the table is
    assembled in grid order either way.
    """
    lam_grid = np.asarray(lam_grid, dtype=float)
    delta_grid = np.asarray(delta_grid, dtype=float)
    for g, name in ((lam_grid, "lam"), (delta_grid, "delta")):
        if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) <= 0):
            raise ValueError(f"{name} grid must be strictly increasing")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method in ("rc", "eff") and lam_grid[0] <= 0.0:
        raise ValueError(f"{method} scans need lam > 0")

    coords = [(float(lam), float(delta)) for delta in delta_grid for lam in lam_grid]
    total = len(coords)
    if workers > 1:
        import concurrent.futures as cf

        points = [None] * total
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_scan_one, method, cfg, lam, delta): k
                for k, (lam, delta) in enumerate(coords)
            }
            done = 0
            for fut in cf.as_completed(futures):
                points[futures[fut]] = fut.result()
                done += 1
                if progress is not None:
                    progress(done, total)
        return ScanTable(points)

    points = []
    for lam, delta in coords:
        points.append(_scan_one(method, cfg, lam, delta))
        if progress is not None:
            progress(len(points), total)
    return ScanTable(points)


def convergence_sweep(m_list, cfg: QarConfig, lam_grid) -> list[dict]:
    """Cooling current versus truncation size along a coupling grid.

    Returns one record per (m, lam) with the relative distance to the
    largest requested truncation.
    """
    m_list = sorted(int(m) for m in m_list)
    if m_list[0] < 2:
        raise ValueError("m must be at least 2")
    if m_list[-1] > 8:
        raise ValueError("truncations above m = 8 exceed the memory budget")
    lam_grid = np.asarray(lam_grid, dtype=float)

    currents = {}
    for m in m_list:
        cfg_m = cfg.with_m(m)
        for lam in lam_grid:
            res, _ = solve_point("rc", cfg_m.with_coupling(float(lam)))
            currents[(m, float(lam))] = res.j_c

    m_ref = m_list[-1]
    records = []
    for m in m_list:
        for lam in lam_grid:
            jc = currents[(m, float(lam))]
            jref = currents[(m_ref, float(lam))]
            records.append(
                {
                    "m": m,
                    "lambda": float(lam),
                    "delta": cfg.levels.delta,
                    "j_c": jc,
                    "j_c_ref": jref,
                    "rel_diff": abs(jc - jref) / abs(jref) if jref != 0.0 else math.nan,
                }
            )
    return records


def write_convergence_csv(records: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "lambda", "delta", "j_c", "j_c_ref", "rel_diff"])
        for r in records:
            writer.writerow(
                [r["m"], _fmt(r["lambda"]), _fmt(r["delta"]), _fmt(r["j_c"]),
                 _fmt(r["j_c_ref"]), _fmt(r["rel_diff"])]
            )


def cooling_window_table(cfg: QarConfig, lam_grid) -> list[dict]:
    """Effective-model cooling predicate along a coupling grid."""
    beta_c, beta_h, beta_w = cfg.betas
    eta = carnot_cop(beta_c, beta_h, beta_w)
    from .effective import effective_cooling_predicate

    rows = []
    for lam in np.asarray(lam_grid, dtype=float):
        model = build_converged_effective_model(cfg.with_coupling(float(lam)))
        rows.append(
            {
                "lambda": float(lam),
                "delta": cfg.levels.delta,
                "e1": model.e1,
                "e2": model.e2,
                "e3": model.e3,
                "gap_ratio": model.gap_ratio,
                "carnot_cop": eta,
                "cooling_predicted": effective_cooling_predicate(model, beta_c, beta_h, beta_w),
                "level_order_broken": model.level_order_broken,
            }
        )
    return rows


def write_window_csv(rows: list[dict], path) -> None:
    cols = ["lambda", "delta", "e1", "e2", "e3", "gap_ratio", "carnot_cop",
            "cooling_predicted", "level_order_broken"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in rows:
            writer.writerow(
                [_fmt(r[c]) if isinstance(r[c], float) else str(r[c]).lower() for c in cols]
            )
