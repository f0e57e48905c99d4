"""Reaction-coordinate mapping of the cold and work baths.

One collective oscillator mode is pulled out of each structured (Brownian)
bath and absorbed into the system.  The extended system is the 3-level
machine plus the two truncated oscillators, dimension 3*M^2, coupled to
residual Ohmic baths through the oscillator positions and to the untouched
hot bath through the original system operator.

The extended Hamiltonian commutes with the Z2 grading
(-1)^(n_c + n_w) * diag(+1, -1, +1): both couplings flip one oscillator
quantum together with the middle level.  Eigenstates therefore carry an
exact parity label, which is what makes level tracking through crossings
unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import COLD, HOT, WORK, BrownianBath, QarConfig, build_system_hamiltonian

#: parity sign of the three system levels under the Z2 grading
_LEVEL_PARITY = np.array([1.0, -1.0, 1.0])


def ladder_position(m: int) -> np.ndarray:
    """Truncated position matrix a + a^dag with entries sqrt(l) off diagonal."""
    x = np.zeros((m, m))
    for l in range(1, m):
        x[l, l - 1] = x[l - 1, l] = np.sqrt(l)
    return x


def number_with_zero_point(m: int) -> np.ndarray:
    """Truncated oscillator energy diag(l + 1/2)."""
    return np.diag(np.arange(m) + 0.5)


def transition_operator(i: int, j: int) -> np.ndarray:
    """|i><j| + |j><i| on the 3-level space (0-based indices)."""
    s = np.zeros((3, 3))
    s[i, j] = s[j, i] = 1.0
    return s


S_COLD = transition_operator(0, 1)
S_WORK = transition_operator(1, 2)
S_HOT = transition_operator(0, 2)


@dataclass(frozen=True)
class ExtendedSystem:
    """Truncated extended Hamiltonian with its bath coupling operators.

    ``parity`` holds the diagonal of the Z2 grading in the product basis
    (system x RC_cold x RC_work); the Hamiltonian never mixes the two
    sectors.
    """

    hamiltonian: np.ndarray
    couplings: dict  # label -> d x d real symmetric operator
    parity: np.ndarray
    m: int

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition of an extended system.

    ``energies`` ascending, ``transform`` orthogonal with columns in the
    same order, ``couplings`` rotated into the eigenbasis, ``parity`` the
    exact +-1 sector label of each eigenstate (None when the input carried
    no grading).
    """

    energies: np.ndarray
    transform: np.ndarray
    couplings: dict
    parity: np.ndarray | None

    @property
    def dim(self) -> int:
        return self.energies.shape[0]


def build_extended_hamiltonian(cfg: QarConfig) -> ExtendedSystem:
    """Assemble the mapped Hamiltonian of the machine plus two oscillators.

    H_ES = H_sys + sum_a [ Omega_a (N_a + 1/2) + lam_a S_a x_a
                           + (lam_a^2 / Omega_a) S_a^2 ]

    The S_a^2 term carries over the completed-square structure of the
    original system-bath coupling (the reorganization energy of the
    structured bath, int J(w)/w dw = lam^2/Omega); without it the machine
    picks up a spurious level repulsion of order lam^2/Omega and the
    cooling window collapses an order of magnitude too early in lam.  It
    is invisible in two-level treatments where S^2 is the identity.  The
    residual-bath quadratic term (order gamma) is dropped together with
    the imaginary part of the dissipators, which it cancels in the
    Markovian equation.
    """
    if not isinstance(cfg.cold, BrownianBath) or not isinstance(cfg.work, BrownianBath):
        raise ValueError("reaction-coordinate mapping requires Brownian cold and work baths")
    m = cfg.m
    h_sys = build_system_hamiltonian(cfg.levels)
    if cfg.cold.omega <= 0.0 or cfg.work.omega <= 0.0:
        raise ValueError("oscillator frequencies must be positive")
    h_sys = h_sys + (cfg.cold.lam**2 / cfg.cold.omega) * (S_COLD @ S_COLD)
    h_sys = h_sys + (cfg.work.lam**2 / cfg.work.omega) * (S_WORK @ S_WORK)
    x = ladder_position(m)
    n_half = number_with_zero_point(m)
    i3, im = np.eye(3), np.eye(m)

    h = (
        np.kron(np.kron(h_sys, im), im)
        + cfg.cold.omega * np.kron(np.kron(i3, n_half), im)
        + cfg.work.omega * np.kron(np.kron(i3, im), n_half)
        + cfg.cold.lam * np.kron(np.kron(S_COLD, x), im)
        + cfg.work.lam * np.kron(np.kron(S_WORK, im), x)
    )

    couplings = {
        COLD: np.kron(np.kron(i3, x), im),
        WORK: np.kron(np.kron(i3, im), x),
        HOT: np.kron(np.kron(S_HOT, im), im),
    }

    osc_parity = (-1.0) ** np.arange(m)
    parity = np.kron(np.kron(_LEVEL_PARITY, osc_parity), osc_parity)
    return ExtendedSystem(hamiltonian=h, couplings=couplings, parity=parity, m=m)


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column positive."""
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0.0] = 1.0
    return vecs * signs


def _break_degenerate_ties(energies: np.ndarray, vecs: np.ndarray, tol: float):
    """Within near-degenerate groups, order columns by dominant basis index."""
    order = np.arange(energies.size)
    i = 0
    while i < energies.size:
        j = i + 1
        while j < energies.size and energies[j] - energies[i] < tol:
            j += 1
        if j - i > 1:
            block = order[i:j]
            dom = np.argmax(np.abs(vecs[:, block]), axis=0)
            order[i:j] = block[np.argsort(dom, kind="stable")]
        i = j
    return energies[order], vecs[:, order]


def eigh_with_convention(
    h: np.ndarray, parity: np.ndarray | None = None, degeneracy_tol: float | None = None
):
    """Ordered eigendecomposition with a deterministic sign convention.

    When a parity grading is supplied, each sector is diagonalized
    separately so eigenvectors never mix sectors even at exact crossings;
    the per-state sector label is returned alongside.
    """
    h = np.asarray(h, dtype=float)
    d = h.shape[0]
    scale = max(1.0, float(np.max(np.abs(h))))
    if degeneracy_tol is None:
        degeneracy_tol = 1e-10 * scale

    if parity is None:
        energies, vecs = np.linalg.eigh(h)
        state_parity = None
    else:
        energies = np.empty(d)
        vecs = np.zeros((d, d))
        state_parity = np.empty(d)
        filled = 0
        for sector in (1.0, -1.0):
            idx = np.flatnonzero(parity == sector)
            if idx.size == 0:
                continue
            sub = h[np.ix_(idx, idx)]
            off = h[np.ix_(idx, np.flatnonzero(parity != sector))]
            if off.size and np.max(np.abs(off)) > 1e-12 * scale:
                raise ValueError("hamiltonian does not respect the supplied parity grading")
            e, v = np.linalg.eigh(sub)
            cols = slice(filled, filled + idx.size)
            energies[cols] = e
            vecs[np.ix_(idx, range(filled, filled + idx.size))] = v
            state_parity[cols] = sector
            filled += idx.size
        order = np.argsort(energies, kind="stable")
        energies, vecs, state_parity = energies[order], vecs[:, order], state_parity[order]

    vecs = _fix_phases(vecs)
    energies, vecs = _break_degenerate_ties(energies, vecs, degeneracy_tol)
    if state_parity is not None:
        # recompute labels after the tie-break reshuffle
        state_parity = np.sign(np.einsum("in,i,in->n", vecs, parity, vecs))
    return energies, vecs, state_parity


def diagonalize(ext: ExtendedSystem) -> EigenSystem:
    """Diagonalize the extended Hamiltonian and rotate the couplings.

    Raises a diagnostic error if the reconstruction residual exceeds
    1e-10 times the matrix scale.
    """
    h = ext.hamiltonian
    if np.max(np.abs(h - h.T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
        raise ValueError("extended hamiltonian is not symmetric")
    energies, u, state_parity = eigh_with_convention(h, ext.parity)

    scale = max(1.0, float(np.max(np.abs(h))))
    resid = np.max(np.abs(u @ np.diag(energies) @ u.T - h))
    if resid > 1e-10 * scale:
        raise RuntimeError(f"eigendecomposition residual {resid:.3e} exceeds tolerance")

    couplings = {label: u.T @ v @ u for label, v in ext.couplings.items()}
    return EigenSystem(energies=energies, transform=u, couplings=couplings, parity=state_parity)
