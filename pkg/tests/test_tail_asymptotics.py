import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from critwave import tail_asymptotics as ta


def test_closed_route_matches_general_route_at_rest():
    for t, r in [(10.0, 100.0), (100.0, 1e4)]:
        assert ta.phi0_closed(t, r) == pytest.approx(ta.phi_sharp(0.0, t, r), rel=1e-9)


def test_phi_is_even_in_ell():
    assert ta.phi_sharp(-0.4, 5.0, 30.0) == ta.phi_sharp(0.4, 5.0, 30.0)


def test_out_of_regime_warns():
    with pytest.warns(UserWarning):
        ta.phi_sharp(0.5, 50.0, 20.0, rel_tol=1e-6)
    val, info = ta.phi_sharp(0.5, 50.0, 20.0, rel_tol=1e-6, full_output=True)
    assert not info["in_regime"]


def test_in_regime_boundary():
    r = 1e4
    assert ta.in_regime(r ** (11 / 12), r)
    assert not ta.in_regime(1.0, r)
    assert not ta.in_regime(1.1 * r ** (11 / 12), r)


@pytest.mark.parametrize("ell", [0.2, 0.5, 0.8])
def test_gamma_theta_closed_forms(ell):
    G, T, D = ta.constants_gamma_theta(ell, 1e-9)
    assert G == pytest.approx(ta.gamma_closed(ell), rel=1e-7)
    assert T == pytest.approx(ta.theta_closed(ell), rel=1e-7)
    assert D == pytest.approx(math.sqrt(1 - ell * ell), rel=1e-6)


def test_gamma_theta_domain():
    with pytest.raises(ValueError):
        ta.constants_gamma_theta(0.0)


@given(st.floats(0.05, 0.9), st.floats(2.0, 40.0), st.floats(1.0, 80.0))
@settings(max_examples=15, deadline=None)
def test_source_mean_two_paths(ell, t, r):
    # raises TailMismatch when the analytic-gradient and combination means differ
    ta.sharp_source_mean(ell, t, r, path="both", tol=1e-7)


def test_source_mean_bad_path():
    with pytest.raises(ValueError):
        ta.sharp_source_mean(0.5, 2.0, 3.0, path="other")


def test_decomposition_sums_to_phi():
    d = ta.appendix_decomposition(0.5, 30.0, 200.0, rel_tol=1e-8)
    assert d.rel_mismatch < 1e-4
    assert d.total == pytest.approx(d.phi, rel=1e-4)


def test_decomposition_mismatch_raises():
    with pytest.raises(ta.TailMismatch):
        ta.appendix_decomposition(0.5, 30.0, 200.0, rel_tol=1e-8, phi=1.0)


def test_extrapolation_exact_model():
    # phi = c (t + r)^-3 is reproduced exactly by the y-variable fit
    c = 0.7
    samples = [(r ** (11 / 12), r, c * (r ** (11 / 12) + r) ** -3) for r in (1e3, 1e4, 1e5)]
    coef, plain = ta.extrapolate_coefficient(samples)
    assert coef == pytest.approx(c, rel=1e-10)
    assert abs(plain - c) > abs(coef - c)


def test_extrapolation_rejects_negative():
    with pytest.raises(ValueError):
        ta.extrapolate_coefficient([(1, 10, -1.0), (2, 20, 1.0), (3, 30, 1.0)])


def test_tail_result_reference():
    res = ta.TailResult(0.6, [], 0.8)
    assert res.reference == pytest.approx(0.8)
    assert res.rel_deviation == pytest.approx(0.0, abs=1e-15)


def test_model_prefactor():
    assert ta.MODEL_PREFACTOR == pytest.approx(1.5 * 15 ** 1.5)
