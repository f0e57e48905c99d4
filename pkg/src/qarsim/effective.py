"""Truncated 3-level effective model of the strongly coupled refrigerator.

When the collective-mode frequency is large compared to temperature,
coupling and level spacing, the machine lives almost entirely in the three
lowest extended-system eigenstates (both oscillators in their dressed
ground state).  Keeping only those states gives back a 3-level
refrigerator with renormalized level energies E_n(lam) and with the
cold/work couplings decorated by the matrix elements of the oscillator
positions between the retained states.

Level identity through crossings is resolved by the exact parity grading:
the state descending from the middle bare level is the lowest odd-parity
eigenstate, the outer two are the lowest pair of even-parity eigenstates.
A crossing of the odd state below the even ground state marks the
breakdown of the refrigerator level scheme.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import COLD, HOT, WORK, OhmicBath, QarConfig
from .rcmap import EigenSystem, S_COLD, S_HOT, S_WORK, build_extended_hamiltonian, diagonalize
from .redfield import (
    DissipatorSpec,
    SolverFailure,
    SteadyStateResult,
    build_generator,
    solve_steady_state,
)


class TruncationTooSmall(SolverFailure):
    """The retained oscillator levels do not converge the lowest states."""


@dataclass(frozen=True)
class EffectiveModel:
    """Renormalized 3-level machine extracted from an extended system.

    e1/e2/e3 follow the adiabatic identity of the states (e2 may drop
    below e1 at strong coupling, flagged by ``level_order_broken``);
    f_cold/f_work/f_hot are the dimensionless coupling decorations.
    """

    e1: float
    e2: float
    e3: float
    f_cold: float
    f_work: float
    f_hot: float
    level_order_broken: bool

    @property
    def gap_ratio(self) -> float:
        """(e2 - e1) / (e3 - e1), the quantity that fixes the cooling window."""
        return (self.e2 - self.e1) / (self.e3 - self.e1)


def track_lowest_levels(eig: EigenSystem) -> tuple[int, int, int]:
    """Indices of the states descending from the three bare levels.

    Returns (lowest even, lowest odd, second even); requires an
    eigensystem carrying parity labels.
    """
    if eig.parity is None:
        raise ValueError("eigensystem has no parity grading; cannot track levels")
    even = np.flatnonzero(eig.parity > 0)
    odd = np.flatnonzero(eig.parity < 0)
    if even.size < 2 or odd.size < 1:
        raise ValueError("not enough states in each parity sector")
    return int(even[0]), int(odd[0]), int(even[1])


def effective_model_from_eigensystem(eig: EigenSystem) -> EffectiveModel:
    """Extract renormalized energies and coupling decorations."""
    i1, i2, i3 = track_lowest_levels(eig)
    e = eig.energies
    return EffectiveModel(
        e1=float(e[i1]),
        e2=float(e[i2]),
        e3=float(e[i3]),
        f_cold=float(eig.couplings[COLD][i1, i2]),
        f_work=float(eig.couplings[WORK][i2, i3]),
        f_hot=float(eig.couplings[HOT][i1, i3]),
        level_order_broken=bool(e[i2] < e[i1]),
    )


def build_effective_model(cfg: QarConfig, check_convergence: bool = True) -> EffectiveModel:
    """Diagonalize the extended system and truncate to the lowest manifold.

    With ``check_convergence`` the three tracked energies are compared
    against a run with one more oscillator level; a drift above 1e-6
    raises TruncationTooSmall.
    """
    omega = cfg.cold.omega
    lam = max(cfg.cold.lam, cfg.work.lam)
    if omega < 5.0 * max(lam, 1.0, cfg.work.temperature):
        warnings.warn(
            "collective-mode frequency is not large compared to coupling and "
            "temperature; the 3-level truncation may be unreliable",
            stacklevel=2,
        )
    eig = diagonalize(build_extended_hamiltonian(cfg))
    model = effective_model_from_eigensystem(eig)
    if check_convergence:
        eig_up = diagonalize(build_extended_hamiltonian(cfg.with_m(cfg.m + 1)))
        up = effective_model_from_eigensystem(eig_up)
        drift = max(abs(model.e1 - up.e1), abs(model.e2 - up.e2), abs(model.e3 - up.e3))
        if drift > 1e-6:
            raise TruncationTooSmall(
                f"tracked energies move by {drift:.2e} when adding one oscillator level; "
                f"increase m (currently {cfg.m})"
            )
    return model


def build_converged_effective_model(cfg: QarConfig, m_cap: int = 8) -> EffectiveModel:
    """Build the effective model, raising the truncation until it converges.

    The 3-level truncation only needs the extended-system eigenproblem, so
    pushing m up is cheap; the cap keeps the dense eigensolve bounded.
    """
    last_exc = None
    for m in range(cfg.m, m_cap + 1):
        try:
            return build_effective_model(cfg.with_m(m))
        except TruncationTooSmall as exc:
            last_exc = exc
    raise last_exc


def effective_cooling_predicate(
    model: EffectiveModel, beta_c: float, beta_h: float, beta_w: float
) -> bool:
    """Cooling condition (e2-e1)/(e3-e1) <= (beta_h-beta_w)/(beta_c-beta_w).

    False outright when the level ordering is broken: the machine no
    longer operates as a refrigerator.
    """
    if not (beta_c > beta_h > beta_w > 0.0):
        raise ValueError("expected beta_c > beta_h > beta_w > 0")
    if model.level_order_broken:
        return False
    return model.gap_ratio <= (beta_h - beta_w) / (beta_c - beta_w)


def eff_steady_state(model: EffectiveModel, cfg: QarConfig) -> SteadyStateResult:
    """Steady state of the renormalized 3-level machine.

    The cold/work baths become Ohmic with coupling gamma * F^2 against the
    bare transition operators; the hot coupling keeps its Ohmic form,
    decorated by the (near-unity) matrix element between the tracked outer
    states.
    """
    if model.f_cold == 0.0 or model.f_work == 0.0:
        raise ValueError(
            "effective couplings vanish (lam = 0); the effective solver needs lam > 0"
        )
    energies = np.array([model.e1, model.e2, model.e3])
    order = np.argsort(energies, kind="stable")
    perm = np.eye(3)[:, order]
    baths = [
        (OhmicBath(COLD, cfg.cold.temperature,
                   gamma=cfg.cold.gamma * model.f_cold**2, cutoff=cfg.cutoff_cold), S_COLD),
        (OhmicBath(HOT, cfg.hot.temperature,
                   gamma=cfg.hot.gamma * model.f_hot**2, cutoff=cfg.hot.cutoff), S_HOT),
        (OhmicBath(WORK, cfg.work.temperature,
                   gamma=cfg.work.gamma * model.f_work**2, cutoff=cfg.cutoff_work), S_WORK),
    ]
    specs = [DissipatorSpec(bath, perm.T @ s @ perm) for bath, s in baths]
    gen = build_generator(
        energies[order], specs, zero_tol=1e-9 * max(1.0, cfg.cold.omega)
    )
    return solve_steady_state(gen)
