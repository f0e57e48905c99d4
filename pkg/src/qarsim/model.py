"""Three-level absorption refrigerator: levels, baths and thermal functions.

Units: hbar = k_B = 1 throughout, and all energies are measured in units of
the total splitting of the working medium (eps3 - eps1 = 1).  The machine
moves heat from a cold bath into a hot bath, powered by an even hotter
"work" bath, so the intended ordering is T_cold < T_hot < T_work.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

COLD = "cold"
HOT = "hot"
WORK = "work"

#: exp(x) overflows float64 near x ~ 709; beyond this the occupation is 0.
_EXP_OVERFLOW = 700.0


@dataclass(frozen=True)
class SystemLevels:
    """Energies of the three working levels, with eps3 - eps1 fixed to 1."""

    eps1: float = 0.0
    eps2: float = 0.2
    eps3: float = 1.0

    def __post_init__(self):
        if abs((self.eps3 - self.eps1) - 1.0) > 1e-12:
            raise ValueError("total splitting eps3 - eps1 must equal 1")

    @property
    def delta(self) -> float:
        """Lower gap eps2 - eps1."""
        return self.eps2 - self.eps1

    @classmethod
    def from_delta(cls, delta: float) -> "SystemLevels":
        return cls(0.0, float(delta), 1.0)


def build_system_hamiltonian(levels: SystemLevels) -> np.ndarray:
    """Bare 3x3 Hamiltonian diag(eps1, eps2, eps3)."""
    return np.diag([levels.eps1, levels.eps2, levels.eps3]).astype(float)


# ---------------------------------------------------------------------------
# Bath descriptions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BathSpec:
    """A thermal bosonic reservoir attached to one contact of the machine."""

    label: str
    temperature: float

    def __post_init__(self):
        if self.label not in (COLD, HOT, WORK):
            raise ValueError(f"unknown bath label {self.label!r}")
        if self.temperature <= 0.0:
            raise ValueError("bath temperature must be positive")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    def spectral_density(self, omega):
        raise NotImplementedError

    def spectral_slope_at_zero(self) -> float:
        """dJ/domega at omega = 0, which sets the zero-frequency rate."""
        raise NotImplementedError


@dataclass(frozen=True)
class BrownianBath(BathSpec):
    """Bath with a peaked Brownian-oscillator spectral density.

    J(w) = 4 w gamma Omega^2 lam^2 / [(w^2 - Omega^2)^2 + (2 pi gamma Omega w)^2]

    ``lam`` is the system-bath coupling energy, ``omega`` the peak frequency
    and ``gamma`` the dimensionless width of the peak.
    """

    lam: float = 0.0
    omega: float = 20.0
    gamma: float = 0.0071 / math.pi

    def __post_init__(self):
        super().__post_init__()
        if self.lam < 0.0 or self.omega < 0.0:
            raise ValueError("lam and omega must be nonnegative")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")

    def spectral_density(self, omega):
        w = np.asarray(omega, dtype=float)
        num = 4.0 * w * self.gamma * self.omega**2 * self.lam**2
        den = (w**2 - self.omega**2) ** 2 + (2.0 * math.pi * self.gamma * self.omega * w) ** 2
        return num / den

    def spectral_slope_at_zero(self) -> float:
        return 4.0 * self.gamma * self.lam**2 / self.omega**2


@dataclass(frozen=True)
class OhmicBath(BathSpec):
    """Bath with an Ohmic spectral density J(w) = gamma * w * exp(-w / cutoff)."""

    gamma: float = 0.0071 / math.pi
    cutoff: float = 500.0

    def __post_init__(self):
        super().__post_init__()
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.cutoff <= 0.0:
            raise ValueError("cutoff must be positive")

    def spectral_density(self, omega):
        w = np.asarray(omega, dtype=float)
        return self.gamma * w * np.exp(-w / self.cutoff)

    def spectral_slope_at_zero(self) -> float:
        return self.gamma


def spectral_density(spec: BathSpec, omega):
    """Evaluate J(omega) for a bath; only omega >= 0 is meaningful.

    Signed transition frequencies are handled by the rate function, which
    always evaluates J at |omega|.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("spectral_density requires omega >= 0")
    return spec.spectral_density(w)


def bose_einstein(beta: float, omega: float) -> float:
    """Bose-Einstein occupation n = 1 / (exp(beta*omega) - 1) for omega > 0."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    if omega <= 0.0:
        raise ValueError("bose_einstein requires omega > 0")
    x = beta * omega
    if x > _EXP_OVERFLOW:
        return 0.0
    return 1.0 / math.expm1(x)


# ---------------------------------------------------------------------------
# Full refrigerator configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QarConfig:
    """Working levels plus the three reservoirs and truncation settings.

    The cold and work baths are Brownian; their (lam, omega) double as the
    reaction-coordinate parameters of the strong-coupling treatment, with
    ``cutoff_cold``/``cutoff_work`` the cutoffs of the residual Ohmic baths
    left over after the mapping.  The hot bath stays Ohmic and weakly
    coupled.  ``m`` is the number of oscillator levels kept per reaction
    coordinate.
    """

    levels: SystemLevels
    cold: BrownianBath
    work: BrownianBath
    hot: OhmicBath
    cutoff_cold: float = 500.0
    cutoff_work: float = 500.0
    m: int = 6

    def __post_init__(self):
        if self.cold.label != COLD or self.work.label != WORK or self.hot.label != HOT:
            raise ValueError("baths must carry labels cold/work/hot")
        if self.m < 2:
            raise ValueError("truncation m must be at least 2")
        if self.cutoff_cold <= 0.0 or self.cutoff_work <= 0.0:
            raise ValueError("residual cutoffs must be positive")
        if not (self.cold.temperature < self.hot.temperature < self.work.temperature):
            warnings.warn(
                "temperatures are not ordered T_cold < T_hot < T_work; "
                "this is not a refrigerator scenario",
                stacklevel=2,
            )

    @property
    def betas(self) -> tuple[float, float, float]:
        """(beta_cold, beta_hot, beta_work)."""
        return (self.cold.beta, self.hot.beta, self.work.beta)

    def with_coupling(self, lam: float) -> "QarConfig":
        """Copy with the cold and work couplings both set to ``lam``."""
        return replace(
            self,
            cold=replace(self.cold, lam=float(lam)),
            work=replace(self.work, lam=float(lam)),
        )

    def with_delta(self, delta: float) -> "QarConfig":
        return replace(self, levels=SystemLevels.from_delta(delta))

    def with_m(self, m: int) -> "QarConfig":
        return replace(self, m=int(m))


def default_config(
    delta: float = 0.2,
    lam: float = 1.0,
    omega: float = 20.0,
    gamma: float = 0.0071 / math.pi,
    t_cold: float = 0.25,
    t_hot: float = 0.5,
    t_work: float = 1.5,
    cutoff: float = 500.0,
    m: int = 6,
) -> QarConfig:
    """Reference parameter set with symmetric cold/work baths.

    Both Brownian baths share the same peak frequency, coupling and width,
    and all three reservoirs share one dimensionless coupling gamma and one
    cutoff.
    """
    return QarConfig(
        levels=SystemLevels.from_delta(delta),
        cold=BrownianBath(COLD, t_cold, lam=lam, omega=omega, gamma=gamma),
        work=BrownianBath(WORK, t_work, lam=lam, omega=omega, gamma=gamma),
        hot=OhmicBath(HOT, t_hot, gamma=gamma, cutoff=cutoff),
        cutoff_cold=cutoff,
        cutoff_work=cutoff,
        m=m,
    )
