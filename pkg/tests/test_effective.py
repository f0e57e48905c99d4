import numpy as np
import pytest

from qarsim.effective import (
    TruncationTooSmall,
    build_converged_effective_model,
    build_effective_model,
    eff_steady_state,
    effective_cooling_predicate,
    effective_model_from_eigensystem,
)
from qarsim.model import default_config
from qarsim.rcmap import build_extended_hamiltonian, diagonalize

BETAS = (4.0, 2.0, 2.0 / 3.0)  # reference temperatures 0.25 / 0.5 / 1.5


def test_decoupled_limit():
    model = build_effective_model(default_config(delta=0.2, lam=0.0, m=4))
    assert model.e2 - model.e1 == pytest.approx(0.2, abs=1e-10)
    assert model.e3 - model.e1 == pytest.approx(1.0, abs=1e-10)
    assert model.f_cold == pytest.approx(0.0, abs=1e-12)
    assert model.f_work == pytest.approx(0.0, abs=1e-12)
    assert model.f_hot == pytest.approx(1.0, abs=1e-12)
    assert not model.level_order_broken


def test_gap_ratio_crossings_match_reported_couplings():
    """Window boundaries of the renormalized 3-level machine.

    At the reference parameters the delta = 0.6 line drops through the
    reversible bound 0.4 near lam ~ 8 and through zero (level crossing)
    near lam ~ 11; the delta = 0.2 line crosses zero near lam ~ 9.
    """
    cfg6 = default_config(delta=0.6, m=6)

    def ratio(cfg, lam):
        return build_effective_model(cfg.with_coupling(lam), check_convergence=False).gap_ratio

    assert ratio(cfg6, 7.0) > 0.4 > ratio(cfg6, 8.5)
    assert ratio(cfg6, 10.0) > 0.0 > ratio(cfg6, 11.9)

    cfg2 = default_config(delta=0.2, m=6)
    assert ratio(cfg2, 8.0) > 0.0 > ratio(cfg2, 10.0)
    # monotone decrease across the strong-coupling side
    vals = [ratio(cfg2, lam) for lam in (5.0, 7.0, 9.0, 11.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_cooling_predicate_reference_points():
    # decoupled limit: predicate reduces to delta <= 0.4
    m02 = build_effective_model(default_config(delta=0.2, lam=0.0, m=4))
    m06 = build_effective_model(default_config(delta=0.6, lam=0.0, m=4))
    assert effective_cooling_predicate(m02, *BETAS)
    assert not effective_cooling_predicate(m06, *BETAS)


def test_predicate_matches_solver_sign():
    """Analytic window prediction agrees with the solved current sign.

    Checked on a coarse (lam, delta) grid; disagreement is tolerated only
    next to a window boundary (finite-width effects).
    """
    from qarsim.analysis import solve_point
    from qarsim.effective import build_converged_effective_model

    lams = np.linspace(1.0, 11.0, 6)
    deltas = np.linspace(0.1, 0.7, 7)
    pred = np.zeros((deltas.size, lams.size), dtype=bool)
    sign = np.zeros_like(pred)
    for i, delta in enumerate(deltas):
        for j, lam in enumerate(lams):
            cfg = default_config(delta=float(delta), lam=float(lam), m=5)
            model = build_converged_effective_model(cfg)
            pred[i, j] = effective_cooling_predicate(model, *BETAS)
            res, _ = solve_point("eff", cfg)
            sign[i, j] = res.j_c > 0.0

    mismatch = pred != sign
    near_boundary = np.zeros_like(pred, dtype=bool)
    nd, nl = pred.shape
    for i in range(nd):
        for j in range(nl):
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < nd and 0 <= b < nl and pred[a, b] != pred[i, j]:
                    near_boundary[i, j] = True
    assert not (mismatch & ~near_boundary).any()


def test_cooling_predicate_degenerate_and_broken():
    model = build_effective_model(default_config(delta=0.2, lam=1.0, m=4))
    from dataclasses import replace

    degenerate = replace(model, e2=model.e1)
    assert effective_cooling_predicate(degenerate, *BETAS)
    broken = replace(model, level_order_broken=True)
    assert not effective_cooling_predicate(broken, *BETAS)
    with pytest.raises(ValueError):
        effective_cooling_predicate(model, 2.0, 4.0, 1.0)


def test_level_order_breaking_sticky_in_lambda():
    cfg = default_config(delta=0.2, m=6)
    flags = [
        build_effective_model(cfg.with_coupling(lam), check_convergence=False).level_order_broken
        for lam in np.arange(0.5, 12.1, 0.5)
    ]
    # one False -> True transition, then sticky
    assert flags[0] is False and flags[-1] is True
    assert flags.index(True) == len(flags) - sum(flags)
    assert all(flags[flags.index(True):])


def test_tracking_matches_overlap_continuation():
    """Parity tracking agrees with maximum-overlap continuation from lam=0."""
    cfg = default_config(delta=0.2, m=5)
    prev_vecs = None
    tracked_rows = []
    for lam in np.arange(0.0, 10.05, 0.05):
        eig = diagonalize(build_extended_hamiltonian(cfg.with_coupling(float(lam))))
        model = effective_model_from_eigensystem(eig)
        tracked_rows.append((model.e1, model.e2, model.e3))
        if prev_vecs is not None:
            overlaps = np.abs(prev_vecs.T @ eig.transform[:, :4])
            # away from crossings each tracked state continues with > 0.9 overlap
            assert np.all(overlaps.max(axis=1) > 0.9)
        prev_vecs = eig.transform[:, :4]
    # energies evolve continuously under the parity labels
    rows = np.array(tracked_rows)
    assert np.max(np.abs(np.diff(rows, axis=0))) < 0.05


def test_coupling_decorations_grow():
    cfg = default_config(delta=0.2, m=6)
    f_prev = 0.0
    for lam in np.linspace(0.5, 12.0, 10):
        model = build_effective_model(cfg.with_coupling(float(lam)), check_convergence=False)
        assert abs(model.f_cold) >= f_prev - 1e-9
        f_prev = abs(model.f_cold)
        assert abs(model.f_cold - model.f_work) < 0.05 * abs(model.f_cold) + 1e-9


def test_truncation_guard_raises():
    # m = 2 cannot converge the dressed states at strong coupling
    cfg = default_config(delta=0.2, lam=8.0, m=2)
    with pytest.raises(TruncationTooSmall):
        build_effective_model(cfg)
    model = build_converged_effective_model(cfg)
    reference = build_effective_model(cfg.with_m(7), check_convergence=False)
    assert model.e2 - model.e1 == pytest.approx(reference.e2 - reference.e1, abs=1e-5)


def test_frequency_separation_warning():
    with pytest.warns(UserWarning):
        build_effective_model(
            default_config(delta=0.2, lam=1.0, omega=3.0, m=4), check_convergence=False
        )


def test_eff_steady_state_agrees_with_bmr_at_weak_coupling():
    from qarsim.analysis import solve_point

    for lam in (0.05, 0.2, 0.3):
        cfg = default_config(delta=0.2, lam=lam, m=4)
        bmr, _ = solve_point("bmr", cfg)
        eff, _ = solve_point("eff", cfg)
        assert eff.j_c == pytest.approx(bmr.j_c, rel=0.05)
        assert eff.j_w == pytest.approx(bmr.j_w, rel=0.05)


def test_eff_rejects_vanishing_coupling():
    model = build_effective_model(default_config(delta=0.2, lam=0.0, m=4))
    with pytest.raises(ValueError):
        eff_steady_state(model, default_config(delta=0.2, lam=0.0, m=4))


def test_eff_equilibrium():
    with pytest.warns(UserWarning):
        cfg = default_config(t_cold=0.5, t_hot=0.5, t_work=0.5, delta=0.2, lam=1.0, m=4)
    model = build_effective_model(cfg)
    res = eff_steady_state(model, cfg)
    for j in res.currents.values():
        assert abs(j) < 1e-12


def test_eff_handles_broken_ordering():
    # beyond the crossing the solver still returns a valid state, not cooling
    cfg = default_config(delta=0.2, lam=11.0, m=6)
    model = build_effective_model(cfg, check_convergence=False)
    assert model.level_order_broken
    res = eff_steady_state(model, cfg)
    assert res.positivity_ok
    assert res.j_c < 0.0
