import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critwave.fields_quadrature import (AREA_S4, AxisymField, PowerLawRegressor, QuadratureSpec,
                                        RadialProfile, breakpoint_rule, fit_power_law, focus_rule,
                                        integrate_axisym, sinh_rule, sobolev_norms, spherical_mean)
from critwave import ground_state as gs


def gaussian():
    return AxisymField(lambda a, b: np.exp(-(a * a + b * b)),
                       lambda a, b: -2 * a * np.exp(-(a * a + b * b)),
                       lambda a, b: -2 * b * np.exp(-(a * a + b * b)))


@pytest.mark.parametrize("method", ["mapped", "adaptive"])
def test_gaussian_integral(method):
    # int_{R^5} exp(-|x|^2) = pi^{5/2}
    v = integrate_axisym(gaussian(), method=method)
    assert v == pytest.approx(math.pi ** 2.5, rel=1e-9)


def test_off_center_bump():
    f = AxisymField(lambda a, b: np.exp(-((a - 7.0) ** 2 + b * b)), centers=(7.0,))
    assert integrate_axisym(f, method="mapped") == pytest.approx(math.pi ** 2.5, rel=1e-9)


def test_exterior_region():
    # int_{|x|>1} (1+|x|^2)^-4 against a 1D radial quadrature
    f = AxisymField(lambda a, b: (1 + a * a + b * b) ** -4.0)
    ref = AREA_S4 * __import__("scipy").integrate.quad(lambda r: (1 + r * r) ** -4 * r ** 4, 1, np.inf)[0]
    assert integrate_axisym(f, r_min=1.0) == pytest.approx(ref, rel=1e-8)


@given(st.floats(0.0, 50.0), st.floats(0.1, 50.0), st.floats(0.05, 5.0))
@settings(max_examples=30, deadline=None)
def test_sinh_rule_length(d0, width, scale):
    # constants are integrated exactly
    x, w = sinh_rule(d0, d0 + width, 1.0, 10, scale)
    assert w.sum() == pytest.approx(width, rel=1e-10)


@given(st.floats(-10, 10), st.floats(0.5, 30), st.floats(-15, 15))
@settings(max_examples=30, deadline=None)
def test_focus_rule_poly(lo, width, c):
    hi = lo + width
    x, w = focus_rule(lo, hi, c, 1.0)
    assert np.sum(w * x ** 2) == pytest.approx((hi ** 3 - lo ** 3) / 3, rel=1e-9, abs=1e-9)


def test_breakpoint_rule_kink():
    x, w = breakpoint_rule([0.0, 1.3, 4.0], 1.0)
    assert np.sum(w * np.abs(x - 1.3)) == pytest.approx((1.3 ** 2 + 2.7 ** 2) / 2, rel=1e-12)


def test_spherical_mean_constants_and_quadratics():
    one = AxisymField(lambda a, b: np.ones_like(a + b))
    assert spherical_mean(one, 3.0) == pytest.approx(1.0, abs=1e-14)
    # x1^2 averages to r^2/5 in five dimensions
    sq = AxisymField(lambda a, b: a * a)
    assert spherical_mean(sq, 2.0) == pytest.approx(4.0 / 5.0, rel=1e-12)
    assert spherical_mean(sq, 2.0, method="adaptive") == pytest.approx(0.8, rel=1e-10)


def test_spherical_mean_rejects_zero_radius():
    with pytest.raises(ValueError):
        spherical_mean(gaussian(), 0.0)


def test_radial_profile_interpolates_nodes():
    g = np.linspace(0, 5, 41)
    p = RadialProfile(g, np.sin(g))
    assert np.allclose(p(g), np.sin(g))
    assert p(2.37) == pytest.approx(math.sin(2.37), abs=1e-6)
    with pytest.raises(ValueError):
        p(6.0)
    with pytest.raises(ValueError):
        RadialProfile(g[::-1], np.sin(g))
    with pytest.raises(ValueError):
        RadialProfile(g, np.full_like(g, np.nan))


def test_sobolev_W_matches_energy():
    prof = RadialProfile.from_callable(gs.W, np.array([0.0, 1.0, 10.0, 100.0]), dfn=gs.dW)
    h1 = sobolev_norms(prof, "H1dot")
    E, _ = gs.energy_W()
    assert h1 == pytest.approx(5 * E, rel=1e-9)
    field = gs.W_field()
    assert sobolev_norms(field, "H1dot", method="mapped") == pytest.approx(5 * E, rel=1e-7)


def test_sobolev_bad_kind():
    with pytest.raises(ValueError):
        sobolev_norms(gaussian(), "H2")


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(gamma=0.6)
    assert QuadratureSpec(rel_tol=1e-7).step == 2.0


@given(st.floats(0.1, 100.0), st.floats(-6.0, 6.0))
@settings(max_examples=50, deadline=None)
def test_power_law_recovers_exact(amp, k):
    x = np.geomspace(1.0, 1e3, 5)
    fit = fit_power_law(zip(x, amp * x ** k))
    assert fit.exponent == pytest.approx(k, abs=1e-9)
    assert fit.amplitude == pytest.approx(amp, rel=1e-8)
    assert fit.max_rel_residual < 1e-8


def test_power_law_errors():
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (2, -2), (3, 3)])
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (0, 2), (3, 3)])
    neg = fit_power_law([(1, -2.0), (2, -1.0), (4, -0.5)])
    assert neg.amplitude == pytest.approx(-2.0) and neg.exponent == pytest.approx(-1.0)


def test_power_law_regressor():
    x = np.geomspace(1, 100, 6)[:, None]
    y = 3.0 * x[:, 0] ** -1.5
    reg = PowerLawRegressor().fit(x, y)
    assert reg.exponent_ == pytest.approx(-1.5)
    assert reg.score(x, y) == pytest.approx(1.0)
    assert reg.get_params() == {"min_samples": 3}
    with pytest.raises(ValueError):
        PowerLawRegressor().fit(np.ones((4, 2)), np.ones(4))
