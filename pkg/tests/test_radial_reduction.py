import math

import numpy as np
from scipy import integrate
import pytest
from hypothesis import given, settings, strategies as st

from critwave.fields_quadrature import RadialProfile
from critwave.radial_reduction import (DivergentTail, HalfLineWaveState, dalembert_eval,
                                       dalembert_halfline, from_phi, phi_from_source,
                                       radial_wave_residual, sigma_cutoff, to_phi)


def test_kernel_maps_to_zero():
    V = RadialProfile.from_callable(lambda r: r ** -3.0, np.array([1.0, 2.0]), dfn=lambda r: -3 * r ** -4.0)
    phi = to_phi(V)
    r = np.linspace(1, 50, 30)
    assert np.max(np.abs(phi(r))) < 1e-12


def test_phi_roundtrip():
    g = np.linspace(0, 10, 801)
    V = RadialProfile(g, np.exp(-g * g))
    back = from_phi(to_phi(V))
    assert np.max(np.abs(back(g) - V(g))) < 1e-6


def test_from_phi_needs_dirichlet():
    g = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        from_phi(RadialProfile(g, 1 + g))


def test_radial_solution_reduces_to_1d():
    # an odd 1D mover pair phi, lifted back through V = r^-3 int_0^r s phi ds,
    # must solve the radial 5D wave equation
    gauss = lambda s: np.exp(-s * s)

    def phi(t, r):
        return gauss(r - t - 5.0) - gauss(-r - t - 5.0)

    def V(t, r):
        r = np.atleast_1d(r)
        out = []
        for rr in r:
            s = np.linspace(0, rr, 2001)
            y = s * phi(t, s)
            out.append(integrate.trapezoid(y, s) / rr ** 3)
        return np.array(out)
    res = radial_wave_residual(V, 1.0, np.array([3.0, 6.0]), h=1e-2)
    assert np.max(np.abs(res)) < 1e-3


def _state(width=1.0, c=6.0, n=801, L=14.0, outgoing=False):
    g = np.linspace(0, L, n)
    p0 = np.exp(-((g - c) / width) ** 2) - np.exp(-((g + c) / width) ** 2)
    if outgoing:
        p1 = 2 * (g - c) / width ** 2 * np.exp(-((g - c) / width) ** 2)
    else:
        p1 = np.zeros_like(g)
    p0[0] = 0.0
    return HalfLineWaveState(RadialProfile(g, p0), RadialProfile(g, p1))


@given(st.floats(0.0, 20.0))
@settings(max_examples=20, deadline=None)
def test_dalembert_conserves_energy(t):
    s = _state()
    e0 = s.energy()
    s2 = dalembert_halfline(s, t)
    assert s2.energy() == pytest.approx(e0, rel=1e-4)


def test_dalembert_dirichlet_and_translation():
    s = _state(outgoing=True)
    p, dp = dalembert_eval(s, 3.0, np.array([0.0, 9.0]))
    assert p[0] == pytest.approx(0, abs=1e-12)
    # the purely outgoing bump just moves right
    assert p[1] == pytest.approx(1.0, rel=1e-6)


def test_dalembert_rejects_bad_data():
    g = np.linspace(0, 5, 51)
    with pytest.raises(ValueError):
        HalfLineWaveState(RadialProfile(g, 1 + 0 * g), RadialProfile(g, 0 * g))


def test_phi_from_source_antiderivative_agrees():
    h = lambda s, a: s ** -3 * np.exp(-a * a) * a
    H = lambda s, a: -0.5 * s ** -3 * np.exp(-a * a)
    t, r = 2.0, 3.0
    direct = phi_from_source(h, t, r, q=3.0)
    closed = phi_from_source(h, t, r, q=3.0, antiderivative=H)
    assert direct == pytest.approx(closed, rel=1e-9)


def test_sigma_cutoff():
    with pytest.raises(DivergentTail):
        sigma_cutoff(1.0, 1.0, 1.0)
    assert sigma_cutoff(1.0, 1.0, 3.0, 1e-12) == pytest.approx(2e6)
