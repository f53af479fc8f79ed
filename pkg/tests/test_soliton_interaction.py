import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from critwave import soliton_interaction as si
from critwave.ground_state import SolitonParams, lorentz_compose

speeds = st.floats(-0.9, 0.9)


def test_config_validation():
    with pytest.raises(ValueError):
        si.TwoSolitonConfig.collinear(0.5, 0.5)
    with pytest.raises(ValueError):
        si.TwoSolitonConfig.collinear(0.5, -0.5)
    with pytest.raises(ValueError):
        si.TwoSolitonConfig(SolitonParams(0.1, y=(0, 1.0, 0, 0, 0)), SolitonParams(0.3))
    with pytest.raises(ValueError):
        si.TwoSolitonConfig(SolitonParams(0.1, direction=(0, 1.0, 0, 0, 0)), SolitonParams(0.3))


@given(speeds, speeds, speeds)
@settings(max_examples=40, deadline=None)
def test_lorentz_factor_boost_invariant(a, b, beta):
    assume(abs(a - b) > 1e-3)
    f = si.lorentz_factor(a, b)
    g = si.lorentz_factor(lorentz_compose(a, beta), lorentz_compose(b, beta))
    assert g == pytest.approx(f, rel=1e-8)


def test_psi_value_and_dipole():
    cfg = si.TwoSolitonConfig.collinear(-0.5, 0.5)
    co = si.interaction_coeffs(cfg)
    assert co.Psi == pytest.approx(2 * 0.75 ** 3)
    assert co.c1 == pytest.approx(co.c2)
    assert co.c1 == pytest.approx(si.NONLIN_C * 0.75 ** 1.5, rel=1e-12)
    dip = si.TwoSolitonConfig.collinear(-0.5, 0.5, eps2=-1)
    assert dip.is_dipole()
    assert si.interaction_coeffs(dip).Psi == 0.0


def test_sigma_and_flip():
    cfg = si.TwoSolitonConfig.collinear(-0.3, 0.6, 1.0, 2.0)
    co = si.interaction_coeffs(cfg)
    assert co.sigma12 == pytest.approx(-0.9 / math.sqrt(1 - 0.36))
    fl = si.interaction_coeffs(cfg.flipped())
    assert fl.Psi == pytest.approx(-co.Psi)
    assert fl.c1 == pytest.approx(-co.c1)


def test_psi_multi_two_solitons():
    s1, s2 = SolitonParams(-0.2, 1.0), SolitonParams(0.4, 1.5, eps=-1)
    pair = si.psi_pair(-0.2, 0.4, 1.0, 1.5, 1, -1) + si.psi_pair(0.4, -0.2, 1.5, 1.0, -1, 1)
    assert si.psi_multi([s1, s2]) == pytest.approx(pair)
    with pytest.raises(ValueError):
        si.psi_multi([s1])


def test_residual_flip_and_shift_invariance():
    cfg = si.TwoSolitonConfig.collinear(-0.5, 0.5)
    a = si.residual_R_sigma(cfg, 40.0)
    b = si.residual_R_sigma(cfg.flipped(), 40.0)
    c = si.residual_R_sigma(cfg.shifted(3.0), 40.0)
    assert b == pytest.approx(a, rel=1e-12)
    assert c[0] == pytest.approx(a[0], rel=1e-6)


def test_counter_term_reduces_residual():
    cfg = si.TwoSolitonConfig.collinear(-0.5, 0.5)
    with_c = si.residual_R_sigma(cfg, 80.0)[0]
    without = si.residual_R_sigma(cfg, 80.0, counter=False)[0]
    assert with_c < 0.5 * without


def test_separation_guard():
    with pytest.raises(ValueError):
        si.residual_R_sigma(si.TwoSolitonConfig.collinear(-0.5, 0.5), 2.0)


def test_claim_ww_prediction():
    assert si.claim_ww_exponent(7 / 3, 1) == -3
    assert si.claim_ww_exponent(1, 1) == pytest.approx(-1)
    assert si.claim_ww_exponent(4 / 3, 4 / 3) == pytest.approx(-3)
    with pytest.raises(ValueError):
        si.cross_term_slope(0.5, 0.5)


@given(st.floats(0.2, 5.0), st.floats(-2.0, 2.0))
@settings(max_examples=30, deadline=None)
def test_modulation_ode_matches_closed(lam, a):
    t0 = 10.0
    assume(math.sqrt(lam) - a / (2 * t0) > 0.05)
    ts = np.array([10.0, 30.0, 1e3])
    ode = si.modulation_ode(lam, a, t0, times=ts)
    assert np.allclose(ode, si.modulation_closed(lam, a, ts), rtol=1e-10, atol=0)


def test_modulation_blowup():
    with pytest.raises(si.ModulationBlowup):
        si.modulation_ode(1.0, 10.0, 2.0)
    with pytest.raises(si.ModulationBlowup):
        si.modulation_closed(1.0, 10.0, 2.0)


def test_ansatz_bare_sum():
    cfg = si.TwoSolitonConfig.collinear(-0.5, 0.5)
    x = np.array([5.0, 1.0, 0, 0, 0])
    W, X = si.assemble_ansatz(cfg, 10.0, x, c=(0.0, 0.0))
    w1 = cfg.s1.evaluate(10.0, x[None])[0]
    w2 = cfg.s2.evaluate(10.0, x[None])[0]
    assert W == pytest.approx(w1 + w2, rel=1e-13)
    with pytest.raises(ValueError):
        si.assemble_ansatz(cfg, 10.0, np.zeros(3))
