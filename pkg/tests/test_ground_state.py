import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critwave import ground_state as gs
from critwave.fields_quadrature import AxisymField, integrate_axisym

speeds = st.floats(-0.95, 0.95)


def test_W_solves_profile_equation():
    r = np.linspace(0, 100, 5001)
    assert np.max(np.abs(gs.ground_residual(r))) < 1e-12
    assert gs.W(np.array([0.0]))[0] == 1.0
    # far field C r^-3
    assert gs.W(np.array([1e5]))[0] * 1e15 == pytest.approx(gs.C_TAIL, rel=1e-8)


def test_LambdaW_in_kernel():
    # L(Lambda W) = -Delta Lambda W - V Lambda W = 0
    r = np.linspace(0.1, 50, 300)
    res = -gs.lapLambdaW(r) - gs.potential(r) * gs.LambdaW(r)
    assert np.max(np.abs(res)) < 1e-12


def test_eigenpair_two_methods():
    d = gs.ground_state_data()
    assert d.lambda0 > 0
    assert abs(d.lambda0_shooting - d.lambda0_matrix) < 1e-6 * d.lambda0
    assert d.residual < 1e-5
    assert d.kappa0 == pytest.approx(gs.kappa(0.0))


@given(speeds)
@settings(max_examples=25, deadline=None)
def test_kappa_scales(ell):
    assert gs.kappa(ell) == pytest.approx((1 - ell * ell) * gs.kappa(0.0), rel=1e-14)


def test_kappa_rejects_light_speed():
    with pytest.raises(ValueError):
        gs.kappa(1.0)


@given(speeds, speeds)
@settings(max_examples=50, deadline=None)
def test_lorentz_compose_is_rapidity_addition(a, b):
    c = gs.lorentz_compose(a, b)
    assert abs(c) < 1
    assert math.atanh(c) == pytest.approx(math.atanh(a) + math.atanh(b), abs=1e-9)
    assert gs.lorentz_compose(b, a) == pytest.approx(c)


def test_soliton_params_validation():
    with pytest.raises(ValueError):
        gs.SolitonParams(1.2)
    with pytest.raises(ValueError):
        gs.SolitonParams(0.2, lam=-1)
    with pytest.raises(ValueError):
        gs.SolitonParams(0.2, eps=0)
    with pytest.raises(ValueError):
        gs.SolitonParams(0.2, direction=(1.0, 1.0, 0.0, 0.0, 0.0))
    s = gs.SolitonParams.from_velocity([0.0, 0.3, 0.4, 0.0, 0.0])
    assert s.ell == pytest.approx(0.5)
    q = s.frame()
    assert np.allclose(q @ np.asarray(s.direction), np.eye(5)[0])


def test_soliton_evaluate_matches_field():
    s = gs.SolitonParams(0.6, lam=2.0, eps=-1)
    f = gs.boosted_W_field(0.6, t=3.0, lam=2.0, eps=-1.0)
    x = np.array([[4.0, 1.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 2.0, 0.0, 1.0]])
    rho = np.linalg.norm(x[:, 1:], axis=1)
    assert np.allclose(s.evaluate(3.0, x), f(x[:, 0], rho), rtol=1e-13)


def test_energy_of_W_and_zero_momentum():
    E, M = gs.energy_momentum(gs.W_field(), AxisymField(lambda a, b: 0.0 * a))
    assert E == pytest.approx(gs.energy_W()[0], rel=1e-8)
    assert np.allclose(M, 0)


@pytest.mark.parametrize("ell", [0.3, 0.6])
def test_boost_energy_identity(ell):
    u = gs.boosted_W_field(ell)
    v = AxisymField(lambda a, b: -ell * u.d_x1(a, b), centers=u.centers)
    E, M = gs.energy_momentum(u, v)
    d1 = integrate_axisym(AxisymField(lambda a, b: u.d_x1(a, b) ** 2), method="mapped")
    E0 = gs.energy_W()[0]
    assert E - ell * ell * d1 == pytest.approx(math.sqrt(1 - ell * ell) * E0, rel=1e-6)
    # the moving soliton carries momentum -ell * int (d1 W_ell)^2
    assert M[0] == pytest.approx(-ell * d1, rel=1e-10)


def test_invert_L_recovers_manufactured_solution():
    V0 = lambda r: np.exp(-r * r)
    lap = lambda r: (4 * r * r - 10) * np.exp(-r * r)
    F = lambda a, b: -lap(np.hypot(a, b)) - gs.potential(np.hypot(a, b)) * V0(np.hypot(a, b))
    V = gs.invert_L(F, radial=True)
    r = np.array([0.0, 0.5, 1.0, 2.0, 4.0, 8.0])
    c = (V(r, 0 * r) - V0(r)) / gs.LambdaW(r)
    # the solution is V0 up to the kernel direction Lambda W
    assert np.ptp(c) < 1e-6


def test_invert_L_rejects_non_orthogonal():
    with pytest.raises(gs.OrthogonalityError):
        gs.invert_L(lambda a, b: gs.LambdaW(np.hypot(a, b)), radial=True)


def test_eval_ground_state_gradient():
    x = np.array([1.0, 2.0, 0.5, 0.0, -1.0])
    h = 1e-6
    e = np.eye(5)[2]
    fd = (gs.eval_ground_state("W", x + h * e) - gs.eval_ground_state("W", x - h * e)) / (2 * h)
    assert gs.eval_ground_state("gradW_j", x, j=3) == pytest.approx(fd, rel=1e-7)
    with pytest.raises(ValueError):
        gs.eval_ground_state("W", np.zeros(4))
