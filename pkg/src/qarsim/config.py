"""INI configuration files for the command-line tools.

Schema (all sections optional; missing values fall back to the reference
parameter set):

    [system]
    delta = 0.2

    [baths.cold]          ; same keys for [baths.work]
    temperature = 0.25
    kind = brownian
    lambda = 1.0
    omega = 20
    gamma = 0.002260
    cutoff = 500          ; cutoff of the residual bath after the mapping

    [baths.hot]
    temperature = 0.5
    kind = ohmic
    gamma = 0.002260
    cutoff = 500

    [solver]
    m = 6

    [grid]
    lambda = 0.05:12:60   ; start:stop:count
    delta = 0.02:0.98:49
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

import numpy as np

from .model import COLD, HOT, WORK, BrownianBath, OhmicBath, QarConfig, default_config


class ConfigError(ValueError):
    """Malformed configuration file or option."""


@dataclass(frozen=True)
class GridSpec:
    lam: np.ndarray
    delta: np.ndarray


def parse_range(text: str, name: str = "range") -> np.ndarray:
    """Parse 'start:stop:count' into a linear grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{name} must look like start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad {name} {text!r}: {exc}") from exc
    if count < 1:
        raise ConfigError(f"{name} needs at least one point")
    return np.linspace(start, stop, count)


def _get_float(section, key, fallback):
    raw = section.get(key)
    if raw is None:
        return fallback
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"option {key!r}: {exc}") from exc


def load_config(path: str | None) -> tuple[QarConfig, GridSpec]:
    """Read a config file; with path None, return the reference setup."""
    base = default_config()
    grid = GridSpec(lam=np.linspace(0.05, 12.0, 60), delta=np.linspace(0.02, 0.98, 49))
    if path is None:
        return base, grid

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    cfg = base
    if parser.has_section("system"):
        cfg = cfg.with_delta(_get_float(parser["system"], "delta", cfg.levels.delta))

    for label, attr in ((COLD, "cold"), (WORK, "work")):
        name = f"baths.{label}"
        if not parser.has_section(name):
            continue
        sec = parser[name]
        kind = sec.get("kind", "brownian").lower()
        if kind != "brownian":
            raise ConfigError(f"{name}: kind must be brownian, got {kind!r}")
        old: BrownianBath = getattr(cfg, attr)
        bath = BrownianBath(
            label,
            _get_float(sec, "temperature", old.temperature),
            lam=_get_float(sec, "lambda", old.lam),
            omega=_get_float(sec, "omega", old.omega),
            gamma=_get_float(sec, "gamma", old.gamma),
        )
        cutoff = _get_float(sec, "cutoff", getattr(cfg, f"cutoff_{attr}"))
        cfg = replace(cfg, **{attr: bath, f"cutoff_{attr}": cutoff})

    if parser.has_section("baths.hot"):
        sec = parser["baths.hot"]
        kind = sec.get("kind", "ohmic").lower()
        if kind != "ohmic":
            raise ConfigError(f"baths.hot: kind must be ohmic, got {kind!r}")
        cfg = replace(
            cfg,
            hot=OhmicBath(
                HOT,
                _get_float(sec, "temperature", cfg.hot.temperature),
                gamma=_get_float(sec, "gamma", cfg.hot.gamma),
                cutoff=_get_float(sec, "cutoff", cfg.hot.cutoff),
            ),
        )

    if parser.has_section("solver"):
        m_raw = parser["solver"].get("m")
        if m_raw is not None:
            try:
                cfg = cfg.with_m(int(m_raw))
            except ValueError as exc:
                raise ConfigError(f"solver.m: {exc}") from exc

    if parser.has_section("grid"):
        sec = parser["grid"]
        lam = parse_range(sec["lambda"], "grid.lambda") if "lambda" in sec else grid.lam
        delta = parse_range(sec["delta"], "grid.delta") if "delta" in sec else grid.delta
        grid = GridSpec(lam=lam, delta=delta)

    try:
        # re-run the dataclass validation against the merged values
        cfg = replace(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, grid


def parse_grid_option(text: str, grid: GridSpec) -> GridSpec:
    """Apply a command-line override like 'lambda=0:12:60,delta=0.1:0.9:40'."""
    lam, delta = grid.lam, grid.delta
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"bad grid item {item!r}; expected name=start:stop:count")
        name, rng = item.split("=", 1)
        name = name.strip()
        if name == "lambda":
            lam = parse_range(rng, "lambda")
        elif name == "delta":
            delta = parse_range(rng, "delta")
        else:
            raise ConfigError(f"unknown grid axis {name!r}")
    return GridSpec(lam=lam, delta=delta)
