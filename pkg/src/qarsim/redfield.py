"""Redfield generator assembly, steady-state solve and heat currents.

The generator acts on density matrices written in the energy eigenbasis of
the (possibly extended) system.  For one bath with Hermitian coupling V and
rate function Gamma, define the filtered operator W with entries

    W[j, k] = V[j, k] * Gamma(E_j - E_k),

where Gamma is the half-Fourier transform of the bath autocorrelation
function (real part only; the imaginary Lamb-shift part is dropped).  The
full non-secular equation of motion is then

    d(rho)/dt = -i [H, rho]
                + sum_baths ( W rho V + V rho W^T - V W rho - rho W^T V ).

This form preserves trace and Hermiticity for any W, satisfies detailed
balance (the Gibbs state of a single bath is exactly stationary) and gives
the textbook golden-rule rates for populations: upward transitions go with
pi*J(w)*n(w), downward with pi*J(w)*(n(w)+1).

Steady states are obtained from the trace-constrained linear system.  Small
problems (d <= 64) assemble the dense d^2 x d^2 matrix and replace one row
by the trace constraint.  Larger problems use a matrix-free Krylov solve
preconditioned by exactly inverting the "drift" part (unitary motion plus
anti-Hermitian decay) through a Sylvester equation in Schur coordinates;
assembling the superoperator at d ~ 100 is not viable since the rotated
couplings are dense.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve, schur
from scipy.linalg.lapack import ztrsyl
from scipy.sparse.linalg import LinearOperator, gmres

from .model import BathSpec, bose_einstein

_DENSE_DIM_LIMIT = 64  # largest d for the assembled d^2 x d^2 solve
_EXP_OVERFLOW = 700.0


class SolverFailure(RuntimeError):
    """Linear-algebra breakdown while solving for the steady state."""


class NonUniqueSteadyState(RuntimeError):
    """The generator has more than one stationary direction."""


# ---------------------------------------------------------------------------
# Bath rate function
# ---------------------------------------------------------------------------

def gamma_rate(bath: BathSpec, omega: float, zero_tol: float = 0.0) -> float:
    """Golden-rule rate Gamma(omega) at a signed transition frequency.

    omega > 0: pi J(omega) n(omega)          (absorption from the bath)
    omega < 0: pi J(|omega|) (n(|omega|)+1)  (emission into the bath)
    omega = 0: pi J'(0) T, the continuous limit of both branches, which
               reduces to pi*gamma/beta for an Ohmic bath.
    """
    w = float(omega)
    if abs(w) <= zero_tol or w == 0.0:
        return np.pi * bath.spectral_slope_at_zero() * bath.temperature
    j = float(bath.spectral_density(abs(w)))
    if w > 0.0:
        return np.pi * j * bose_einstein(bath.beta, w)
    return np.pi * j * (bose_einstein(bath.beta, -w) + 1.0)


def _gamma_matrix(bath: BathSpec, gaps: np.ndarray, zero_tol: float) -> np.ndarray:
    """Vectorized Gamma over a matrix of signed gaps E_j - E_k."""
    aw = np.abs(gaps)
    near_zero = aw <= zero_tol
    aw_safe = np.where(near_zero, 1.0, aw)
    j = bath.spectral_density(aw_safe)
    x = bath.beta * aw_safe
    n = np.where(x > _EXP_OVERFLOW, 0.0, 1.0 / np.expm1(np.minimum(x, _EXP_OVERFLOW)))
    gamma = np.where(gaps > 0.0, np.pi * j * n, np.pi * j * (n + 1.0))
    gamma[near_zero] = np.pi * bath.spectral_slope_at_zero() * bath.temperature
    return gamma


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DissipatorSpec:
    """One bath attached through a real symmetric coupling in the eigenbasis."""

    bath: BathSpec
    coupling: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.coupling, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("coupling must be a square matrix")
        if np.max(np.abs(v - v.T)) > 1e-10 * max(1.0, np.max(np.abs(v))):
            raise ValueError("coupling must be symmetric")
        object.__setattr__(self, "coupling", v)


class RedfieldGenerator:
    """Matrix-free Redfield superoperator over a fixed eigenbasis.

    ``state_parity`` may carry a +-1 grading of the eigenstates under a
    symmetry of the Hamiltonian; when every coupling is parity-pure the
    Krylov solver then works on the invariant block sector at a quarter
    of the dense cost.
    """

    def __init__(self, energies, specs, zero_tol: float | None = None, state_parity=None):
        energies = np.asarray(energies, dtype=float)
        if energies.ndim != 1:
            raise ValueError("energies must be a vector")
        # deterministic tie-breaking may reorder states inside degenerate
        # groups, so sortedness is only required beyond the degeneracy scale
        if np.any(np.diff(energies) < -1e-8 * max(1.0, np.max(np.abs(energies)))):
            raise ValueError("energies must be sorted ascending")
        if not specs:
            raise ValueError("at least one dissipator is required")
        d = energies.size
        for s in specs:
            if s.coupling.shape != (d, d):
                raise ValueError("coupling dimension does not match energies")

        self.dim = d
        self.energies = energies
        self.specs = list(specs)
        self._norm_cache = None
        self.state_parity = None if state_parity is None else np.asarray(state_parity)
        spread = float(energies[-1] - energies[0])
        self.zero_tol = 1e-9 * max(1.0, spread) if zero_tol is None else float(zero_tol)

        # energies enter only through differences; shift for numerical range
        e = energies - energies[0]
        self._e = e
        self._omega = e[:, None] - e[None, :]

        self._v = []
        self._w = []
        self._vw = []
        self._wtv = []
        self._flux_off = []  # off-diagonal part of O with j = 2 Re Tr[O rho]
        for s in specs:
            v = s.coupling
            w = v * _gamma_matrix(s.bath, self._omega, self.zero_tol)
            self._v.append(v)
            self._w.append(w)
            self._vw.append(v @ w)
            self._wtv.append(w.T @ v)
            flux = v @ (e[:, None] * w) - e[:, None] * (v @ w)
            np.fill_diagonal(flux, 0.0)
            self._flux_off.append(flux)
        self.labels = [s.bath.label for s in specs]

    # -- action ------------------------------------------------------------

    def apply_dissipator(self, index: int, rho: np.ndarray) -> np.ndarray:
        """D_alpha(rho) for the bath at ``index``."""
        v, w = self._v[index], self._w[index]
        return w @ rho @ v + v @ rho @ w.T - self._vw[index] @ rho - rho @ self._wtv[index]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Full action L(rho), unitary part included."""
        out = -1j * (self._omega * rho)
        for i in range(len(self.specs)):
            out = out + self.apply_dissipator(i, rho)
        return out

    def drift_matrix(self) -> np.ndarray:
        """K with L0(rho) = -i (K rho - rho K^dag); K = H - i sum_a V_a W_a."""
        return np.diag(self._e).astype(complex) - 1j * sum(self._vw)

    def to_matrix(self) -> np.ndarray:
        """Assembled dense superoperator on row-major vectorized rho."""
        d = self.dim
        if d > _DENSE_DIM_LIMIT:
            raise MemoryError(
                f"dense superoperator at d={d} needs {16 * d**4 / 1e9:.1f} GB; "
                "use the matrix-free action instead"
            )
        eye = np.eye(d)
        mat = np.zeros((d * d, d * d))
        for v, w, vw in zip(self._v, self._w, self._vw):
            mat += np.kron(w, v) + np.kron(v, w) - np.kron(vw, eye) - np.kron(eye, vw)
        lmat = mat.astype(complex)
        idx = np.arange(d * d)
        lmat[idx, idx] -= 1j * self._omega.ravel()
        return lmat

    def norm_estimate(self) -> float:
        """Cheap upper-bound scale for residual tolerances (Frobenius bounds)."""
        if self._norm_cache is None:
            scale = float(np.max(np.abs(self._omega)))
            for v, w, vw in zip(self._v, self._w, self._vw):
                nv = np.linalg.norm(v)
                nw = np.linalg.norm(w)
                scale += 2.0 * nv * nw + 2.0 * np.linalg.norm(vw)
            self._norm_cache = max(scale, 1e-30)
        return self._norm_cache

    # -- observables ---------------------------------------------------------

    def heat_current(self, index_or_label, rho: np.ndarray) -> float:
        """j_alpha = Tr[D_alpha(rho) H]; positive when heat enters the system.

        The population part is summed pairwise as (E_j - E_m) times the net
        flow W_jm p_m - W_mj p_j, so the detailed-balance cancellation
        happens inside one subtraction instead of across the whole trace;
        this keeps the three currents summing to zero at rounding level
        even when they are many orders below the gross one-way fluxes.
        """
        i = self._index(index_or_label)
        v, w = self._v[i], self._w[i]
        p = rho.diagonal().real
        net = w.T * p[:, None] - w * p[None, :]
        de = self._e[None, :] - self._e[:, None]
        j_pop = float(np.sum(de * v * net))
        j_coh = 2.0 * float(np.real(np.sum(self._flux_off[i] * rho.T)))
        return j_pop + j_coh

    def heat_currents(self, rho: np.ndarray) -> dict:
        return {lab: self.heat_current(i, rho) for i, lab in enumerate(self.labels)}

    def _index(self, index_or_label) -> int:
        if isinstance(index_or_label, str):
            return self.labels.index(index_or_label)
        return int(index_or_label)

    def pauli_matrix(self) -> np.ndarray:
        """Rate matrix of the diagonal sector: dp/dt = A p (coherences ignored)."""
        d = self.dim
        gain = np.zeros((d, d))
        for v, w in zip(self._v, self._w):
            gain += 2.0 * v * w
        return gain - np.diag(gain.sum(axis=0))

    def pauli_populations(self) -> np.ndarray:
        """Steady populations of the diagonal (rate-equation) sector.

        Used as the Krylov starting guess; coherence couplings are ignored.
        """
        d = self.dim
        a = self.pauli_matrix()
        a[0, :] = 1.0
        b = np.zeros(d)
        b[0] = 1.0
        try:
            p = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            return np.full(d, 1.0 / d)
        if not np.all(np.isfinite(p)):
            return np.full(d, 1.0 / d)
        return p


def build_generator(
    energies, specs, zero_tol: float | None = None, state_parity=None
) -> RedfieldGenerator:
    """Assemble the Redfield generator for sorted ``energies`` and baths."""
    return RedfieldGenerator(energies, specs, zero_tol=zero_tol, state_parity=state_parity)


def heat_current(generator: RedfieldGenerator, label, rho: np.ndarray) -> float:
    return generator.heat_current(label, rho)


# ---------------------------------------------------------------------------
# Steady state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SteadyStateResult:
    """Stationary density matrix with per-contact heat currents."""

    rho: np.ndarray
    currents: dict
    residual: float
    residual_rel: float
    min_eigenvalue: float
    positivity_ok: bool
    iterations: int = 0

    @property
    def j_c(self) -> float:
        return self.currents["cold"]

    @property
    def j_h(self) -> float:
        return self.currents["hot"]

    @property
    def j_w(self) -> float:
        return self.currents["work"]

    @property
    def cop(self) -> float | None:
        """Cooling coefficient of performance j_c / j_w, defined for j_w > 0."""
        if "cold" not in self.currents or "work" not in self.currents:
            return None
        if self.currents["work"] <= 0.0:
            return None
        return self.currents["cold"] / self.currents["work"]


def validate_density_matrix(rho: np.ndarray, positivity_tol: float = 1e-7):
    """Check trace, Hermiticity and positivity; returns (ok, min_eigenvalue).

    Small negative eigenvalues down to -positivity_tol are tolerated with a
    warning (a known artifact of the non-secular equation); anything below
    marks the state invalid.
    """
    if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > 1e-10:
        raise ValueError("density matrix trace differs from 1")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix is not Hermitian")
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    if min_eig < -positivity_tol:
        return False, min_eig
    if min_eig < 0.0:
        warnings.warn(
            f"steady state has a small negative eigenvalue {min_eig:.2e}",
            stacklevel=3,
        )
    return True, min_eig


def _finish(gen: RedfieldGenerator, rho: np.ndarray, iterations: int) -> SteadyStateResult:
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    resid = float(np.linalg.norm(gen.apply(rho)))
    scale = gen.norm_estimate()
    ok, min_eig = validate_density_matrix(rho)
    return SteadyStateResult(
        rho=rho,
        currents=gen.heat_currents(rho),
        residual=resid,
        residual_rel=resid / scale,
        min_eigenvalue=min_eig,
        positivity_ok=ok,
        iterations=iterations,
    )


def _solve_dense(gen: RedfieldGenerator, check_unique: bool, rtol: float) -> SteadyStateResult:
    d = gen.dim
    lmat = gen.to_matrix()
    trace_row = np.zeros(d * d, dtype=complex)
    trace_row[:: d + 1] = 1.0

    def constrained_solve(row_index: int, row: np.ndarray) -> np.ndarray:
        a = lmat.copy()
        a[row_index, :] = row
        b = np.zeros(d * d, dtype=complex)
        b[row_index] = 1.0
        try:
            lu = lu_factor(a)
            x = lu_solve(lu, b)
            for _ in range(2):  # refinement pushes the row-wise residual to rounding level
                x += lu_solve(lu, b - a @ x)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure(f"dense steady-state solve failed: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise SolverFailure("dense steady-state solve produced non-finite entries")
        return x

    def classify_breakdown(cause):
        if d * d <= 4096:
            dims = _nullspace_dimension(lmat)
            if dims > 1:
                raise NonUniqueSteadyState(
                    f"generator nullspace has dimension {dims}"
                ) from cause
        raise cause

    try:
        x = constrained_solve(0, trace_row)
    except SolverFailure as exc:
        classify_breakdown(exc)
    rho = x.reshape(d, d)
    tr = np.trace(rho)
    if abs(tr) < 1e-8:
        raise NonUniqueSteadyState("trace-constrained solve returned a traceless direction")
    rho = rho / tr

    resid = float(np.linalg.norm(gen.apply(rho)))
    if resid > rtol * gen.norm_estimate():
        # the dropped row was not redundant: nullspace empty or multiple
        classify_breakdown(
            SolverFailure(f"steady-state residual {resid:.3e} above tolerance")
        )

    if check_unique:
        rng = np.random.default_rng(12345)
        row = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
        x2 = constrained_solve(d + 1, row)
        tr2 = np.trace(x2.reshape(d, d))
        if abs(tr2) < 1e-10 * np.linalg.norm(x2):
            raise NonUniqueSteadyState("found a traceless stationary direction")
        rho2 = x2.reshape(d, d) / tr2
        if np.linalg.norm(gen.apply(rho2)) < rtol * gen.norm_estimate():
            if np.max(np.abs(rho2 - rho)) > 1e-6 * max(1.0, np.max(np.abs(rho))):
                raise NonUniqueSteadyState("two independent stationary states found")

    return _finish(gen, rho, iterations=0)


def _nullspace_dimension(lmat: np.ndarray) -> int:
    s = np.linalg.svd(lmat, compute_uv=False)
    cut = max(1.0, s[0]) * 1e-10
    return int(np.sum(s < cut))


def _schur_sylvester(kmat: np.ndarray):
    """Return a solver for K Z - Z K^dag = iC via complex Schur coordinates."""
    try:
        t, q = schur(kmat, output="complex")
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"Schur decomposition failed: {exc}") from exc
    qh = np.ascontiguousarray(q.conj().T)

    def drift_solve(c: np.ndarray) -> np.ndarray:
        ct = qh @ (1j * c) @ q
        y, scale, info = ztrsyl(t, t, ct, trana="N", tranb="C", isgn=-1)
        if info < 0:
            raise SolverFailure(f"ztrsyl failed with info={info}")
        return (q @ y @ qh) / scale

    return drift_solve


class _FullWorkspace:
    """Krylov iteration over the full d x d density matrix."""

    def __init__(self, gen: RedfieldGenerator):
        self.gen = gen
        d = gen.dim
        self.d = d
        self.n = d * d
        self.drift_solve = _schur_sylvester(gen.drift_matrix())
        self.eye_flat = np.eye(d, dtype=complex).ravel()
        self._vc = [v.astype(complex) for v in gen._v]
        self._wc = [w.astype(complex) for w in gen._w]
        self._wtc = [np.ascontiguousarray(w.T).astype(complex) for w in gen._w]

    def _jump(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho)
        for v, w, wt in zip(self._vc, self._wc, self._wtc):
            out += w @ rho @ v + v @ rho @ wt
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        rho = x.reshape(self.d, self.d)
        out = rho + self.drift_solve(self._jump(rho))
        return out.ravel() + self.eye_flat * np.trace(rho)

    def rhs(self) -> np.ndarray:
        return self.eye_flat.copy()

    def start(self) -> np.ndarray:
        return np.diag(self.gen.pauli_populations()).astype(complex).ravel()

    def unpack(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(self.d, self.d)

    def pack_residual(self, s: np.ndarray) -> np.ndarray:
        return self.drift_solve(-s).ravel()

    def trace(self, x: np.ndarray) -> complex:
        return np.trace(x.reshape(self.d, self.d))

    def pack(self, rho: np.ndarray) -> np.ndarray:
        return rho.ravel()


class _ParityWorkspace:
    """Krylov iteration restricted to the parity-diagonal block sector.

    The stationary state has no matrix elements between even and odd
    eigenstates when the Hamiltonian carries the grading and every
    coupling is parity-pure, so the unknowns reduce to the two diagonal
    blocks and every product runs at half linear size.
    """

    def __init__(self, gen: RedfieldGenerator):
        par = gen.state_parity
        d = gen.dim
        self.gen = gen
        self.perm = np.argsort(-par, kind="stable")
        self.inv = np.argsort(self.perm)
        self.ne = int(np.sum(par > 0))
        self.no = d - self.ne
        if self.ne == 0 or self.no == 0:
            raise ValueError("degenerate grading")
        p, ne = self.perm, self.ne

        kperm = gen.drift_matrix()[np.ix_(p, p)]
        kscale = max(1.0, float(np.max(np.abs(kperm))))
        if (
            np.max(np.abs(kperm[:ne, ne:])) > 1e-12 * kscale
            or np.max(np.abs(kperm[ne:, :ne])) > 1e-12 * kscale
        ):
            raise ValueError("drift matrix is not parity-block-diagonal")
        self.drift_e = _schur_sylvester(np.ascontiguousarray(kperm[:ne, :ne]))
        self.drift_o = _schur_sylvester(np.ascontiguousarray(kperm[ne:, ne:]))

        # per bath, contraction plans A @ X_sector @ B for each output sector
        self.plan_e = []
        self.plan_o = []
        for v, w in zip(gen._v, gen._w):
            vp = v[np.ix_(p, p)]
            wp = w[np.ix_(p, p)]
            scale = max(np.max(np.abs(vp)), 1e-300)
            blocks = {
                "v_ee": vp[:ne, :ne], "v_eo": vp[:ne, ne:],
                "v_oe": vp[ne:, :ne], "v_oo": vp[ne:, ne:],
                "w_ee": wp[:ne, :ne], "w_eo": wp[:ne, ne:],
                "w_oe": wp[ne:, :ne], "w_oo": wp[ne:, ne:],
            }
            diag_w = max(np.max(np.abs(vp[:ne, :ne])), np.max(np.abs(vp[ne:, ne:])))
            off_w = max(np.max(np.abs(vp[:ne, ne:])), np.max(np.abs(vp[ne:, :ne])))
            if min(diag_w, off_w) > 1e-12 * scale:
                raise ValueError("coupling is not parity-pure")
            c = {k: np.ascontiguousarray(b, dtype=complex) for k, b in blocks.items()}
            if off_w <= 1e-12 * scale:  # parity-even coupling: blocks ee/oo
                self.plan_e += [(c["w_ee"], "e", c["v_ee"]), (c["v_ee"], "e", _ct(c["w_ee"]))]
                self.plan_o += [(c["w_oo"], "o", c["v_oo"]), (c["v_oo"], "o", _ct(c["w_oo"]))]
            else:  # parity-odd coupling: blocks eo/oe
                self.plan_e += [(c["w_eo"], "o", c["v_oe"]), (c["v_eo"], "o", _ct(c["w_eo"]))]
                self.plan_o += [(c["w_oe"], "e", c["v_eo"]), (c["v_oe"], "e", _ct(c["w_oe"]))]

        self.n = self.ne**2 + self.no**2
        self.eye_e = np.eye(self.ne, dtype=complex).ravel()
        self.eye_o = np.eye(self.no, dtype=complex).ravel()

    def _split(self, x: np.ndarray):
        ne2 = self.ne * self.ne
        return x[:ne2].reshape(self.ne, self.ne), x[ne2:].reshape(self.no, self.no)

    def _join(self, xe: np.ndarray, xo: np.ndarray) -> np.ndarray:
        return np.concatenate([xe.ravel(), xo.ravel()])

    def _jump(self, xe: np.ndarray, xo: np.ndarray):
        je = np.zeros_like(xe)
        jo = np.zeros_like(xo)
        sectors = {"e": xe, "o": xo}
        for a, s, b in self.plan_e:
            je += a @ sectors[s] @ b
        for a, s, b in self.plan_o:
            jo += a @ sectors[s] @ b
        return je, jo

    def matvec(self, x: np.ndarray) -> np.ndarray:
        xe, xo = self._split(x)
        je, jo = self._jump(xe, xo)
        tr = np.trace(xe) + np.trace(xo)
        out_e = (xe + self.drift_e(je)).ravel() + self.eye_e * tr
        out_o = (xo + self.drift_o(jo)).ravel() + self.eye_o * tr
        return np.concatenate([out_e, out_o])

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.eye_e, self.eye_o])

    def start(self) -> np.ndarray:
        pops = self.gen.pauli_populations()[self.perm].astype(complex)
        return self._join(np.diag(pops[: self.ne]), np.diag(pops[self.ne :]))

    def unpack(self, x: np.ndarray) -> np.ndarray:
        xe, xo = self._split(x)
        full = np.zeros((self.gen.dim, self.gen.dim), dtype=complex)
        full[: self.ne, : self.ne] = xe
        full[self.ne :, self.ne :] = xo
        return full[np.ix_(self.inv, self.inv)]

    def pack(self, rho: np.ndarray) -> np.ndarray:
        rp = rho[np.ix_(self.perm, self.perm)]
        return self._join(rp[: self.ne, : self.ne], rp[self.ne :, self.ne :])

    def pack_residual(self, s: np.ndarray) -> np.ndarray:
        sp = s[np.ix_(self.perm, self.perm)]
        ze = self.drift_e(-np.ascontiguousarray(sp[: self.ne, : self.ne]))
        zo = self.drift_o(-np.ascontiguousarray(sp[self.ne :, self.ne :]))
        return self._join(ze, zo)

    def trace(self, x: np.ndarray) -> complex:
        xe, xo = self._split(x)
        return np.trace(xe) + np.trace(xo)


def _ct(m: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(m.T)


def _make_workspace(gen: RedfieldGenerator):
    if gen.state_parity is not None:
        try:
            return _ParityWorkspace(gen)
        except ValueError:
            pass
    return _FullWorkspace(gen)


def _solve_krylov(gen: RedfieldGenerator, rtol: float, maxiter: int) -> SteadyStateResult:
    d = gen.dim
    ws = _make_workspace(gen)
    n = ws.n
    op = LinearOperator((n, n), matvec=ws.matvec, dtype=complex)
    x = ws.start()

    count = {"n": 0}

    def cb(_):
        count["n"] += 1

    # Iterative refinement with the residual re-evaluated through the exact
    # generator each round: the population components of L(rho) carry only
    # rate-scale rounding noise, so refinement drives the energy-weighted
    # (heat-current) residual far below the global norm floor.
    target = rtol * gen.norm_estimate()
    resid = np.inf
    for round_ in range(5):
        s = gen.apply(ws.unpack(x))
        prev, resid = resid, float(np.linalg.norm(s))
        if resid <= target and resid > 0.25 * prev:
            break  # converged and stagnating at the rounding floor
        rhs = ws.pack_residual(s)
        delta, _info = gmres(
            op,
            rhs,
            rtol=1e-12 if round_ == 0 else 1e-5,
            atol=0.0,
            restart=min(300, n),
            maxiter=max(1, maxiter // 300),
            callback=cb,
            callback_type="pr_norm",
        )
        delta = delta - ws.trace(delta) * (x / ws.trace(x))
        x = x + delta
    rho = ws.unpack(x)
    resid = float(np.linalg.norm(gen.apply(rho)))
    if resid > target:
        raise SolverFailure(
            f"Krylov steady-state solve stagnated at residual {resid:.3e} "
            f"(target {target:.3e}) after {count['n']} iterations"
        )

    # Population polish: the Krylov rounds leave the exponentially small
    # high-energy occupations balanced only to the global noise floor, and
    # their energy weight leaks into the current sum.  A diagonal
    # correction from the well-scaled d x d rate balance removes it.
    a = gen.pauli_matrix()
    a[0, :] = 1.0
    try:
        lu = lu_factor(a)
        for _ in range(2):
            sd = np.real(np.diag(gen.apply(rho))).copy()
            sd[0] = 0.0
            dp = lu_solve(lu, -sd)
            if not np.all(np.isfinite(dp)):
                break
            rho = rho + np.diag(dp).astype(complex)
    except np.linalg.LinAlgError:
        pass
    return _finish(gen, rho, iterations=count["n"])


def solve_steady_state(
    gen: RedfieldGenerator,
    method: str = "auto",
    rtol: float = 1e-10,
    check_unique: bool | None = None,
    maxiter: int = 900,
) -> SteadyStateResult:
    """Solve L(rho) = 0 under Tr[rho] = 1.

    method "auto" picks the dense row-replacement solve for d <= 64 and the
    preconditioned matrix-free Krylov solve above that.  ``check_unique``
    (dense path only) solves a second, differently-constrained system and
    raises NonUniqueSteadyState if an independent stationary direction
    exists; it defaults to on for very small systems where decoupled
    sectors are a real hazard.
    """
    if method == "auto":
        method = "dense" if gen.dim <= _DENSE_DIM_LIMIT else "krylov"
    if method == "dense":
        if check_unique is None:
            check_unique = gen.dim <= 16
        return _solve_dense(gen, check_unique=check_unique, rtol=rtol)
    if method == "krylov":
        return _solve_krylov(gen, rtol=rtol, maxiter=maxiter)
    raise ValueError(f"unknown method {method!r}")
