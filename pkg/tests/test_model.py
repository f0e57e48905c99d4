import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qarsim.model import (
    COLD,
    HOT,
    WORK,
    BrownianBath,
    OhmicBath,
    SystemLevels,
    bose_einstein,
    build_system_hamiltonian,
    default_config,
    spectral_density,
)

GAMMA_REF = 0.0071 / math.pi


def test_levels_normalization_enforced():
    with pytest.raises(ValueError):
        SystemLevels(0.0, 0.2, 1.5)
    lv = SystemLevels.from_delta(0.3)
    assert lv.delta == pytest.approx(0.3)


@pytest.mark.parametrize(
    "delta,expected",
    [
        (0.2, [0.0, 0.2, 1.0]),
        (0.0, [0.0, 0.0, 1.0]),
        (1.0, [0.0, 1.0, 1.0]),
    ],
)
def test_system_hamiltonian_diagonal(delta, expected):
    h = build_system_hamiltonian(SystemLevels.from_delta(delta))
    assert np.allclose(h, np.diag(expected))
    assert h.shape == (3, 3)


def test_ohmic_density_vanishes_at_zero():
    bath = OhmicBath(HOT, 0.5, gamma=GAMMA_REF, cutoff=500.0)
    assert spectral_density(bath, 0.0) == 0.0


def test_ohmic_density_reference_value():
    # gamma * 1 * exp(-1/500) at the reference coupling, frozen from mpmath
    bath = OhmicBath(HOT, 0.5, gamma=GAMMA_REF, cutoff=500.0)
    assert float(spectral_density(bath, 1.0)) == pytest.approx(
        0.00225548470850966, rel=1e-14
    )


def test_brownian_resonance_value():
    # closed form lam^2 / (pi^2 gamma Omega) at the peak
    bath = BrownianBath(COLD, 0.25, lam=3.0, omega=20.0, gamma=GAMMA_REF)
    expected = 3.0**2 / (math.pi**2 * GAMMA_REF * 20.0)
    assert float(spectral_density(bath, 20.0)) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(20.174570251085324, rel=1e-13)


def test_brownian_peak_near_omega():
    # the maximum sits within O(gamma^2) of the nominal peak for narrow widths
    bath = BrownianBath(COLD, 0.25, lam=1.0, omega=20.0, gamma=0.01)
    w = np.linspace(19.0, 21.0, 20001)
    peak = w[np.argmax(spectral_density(bath, w))]
    assert abs(peak - 20.0) / 20.0 < 10 * 0.01**2 + 1e-4


def test_spectral_density_rejects_negative():
    bath = OhmicBath(HOT, 0.5)
    with pytest.raises(ValueError):
        spectral_density(bath, -1.0)


@given(st.floats(min_value=0.0, max_value=100.0))
def test_spectral_density_nonnegative(w):
    for bath in (
        OhmicBath(HOT, 0.5, gamma=GAMMA_REF, cutoff=500.0),
        BrownianBath(COLD, 0.25, lam=2.0, omega=20.0, gamma=GAMMA_REF),
    ):
        assert spectral_density(bath, w) >= 0.0


def test_bose_einstein_exact_points():
    assert bose_einstein(1.0, math.log(2.0)) == pytest.approx(1.0, rel=1e-14)
    assert bose_einstein(1.0, 800.0) == 0.0  # overflow guard
    # series oracle n = 1/x - 1/2 + O(x) at x = 1e-6
    n = bose_einstein(1.0, 1e-6)
    assert abs(n - (1e6 - 0.5)) / n < 1e-6
    assert n == pytest.approx(999999.5000000833, rel=1e-12)


def test_bose_einstein_rejects_nonpositive():
    with pytest.raises(ValueError):
        bose_einstein(1.0, 0.0)
    with pytest.raises(ValueError):
        bose_einstein(1.0, -0.3)
    with pytest.raises(ValueError):
        bose_einstein(-1.0, 1.0)


@given(st.floats(min_value=1e-3, max_value=30.0))
def test_bose_identity(x):
    # n + 1 = e^x n
    n = bose_einstein(1.0, x)
    assert n + 1.0 == pytest.approx(math.exp(x) * n, rel=1e-12)


def test_config_temperature_ordering_warns():
    with pytest.warns(UserWarning):
        default_config(t_cold=2.0, t_hot=0.5, t_work=1.5)


def test_config_validation():
    from qarsim.model import BathSpec

    with pytest.raises(ValueError):
        default_config(m=1)
    with pytest.raises(ValueError):
        OhmicBath(HOT, -0.5)
    with pytest.raises(ValueError):
        BrownianBath(COLD, 0.25, lam=-1.0)
    with pytest.raises(ValueError):
        BathSpec("lukewarm", 1.0)


def test_config_helpers():
    cfg = default_config(delta=0.2, lam=1.0)
    cfg2 = cfg.with_coupling(3.0).with_delta(0.5).with_m(4)
    assert cfg2.cold.lam == 3.0 and cfg2.work.lam == 3.0
    assert cfg2.levels.delta == 0.5
    assert cfg2.m == 4
    assert cfg.betas == (4.0, 2.0, 1.0 / 1.5)
