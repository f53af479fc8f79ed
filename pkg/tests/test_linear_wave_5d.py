import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critwave.fields_quadrature import AxisymField
from critwave.linear_wave_5d import (ENVELOPE_REGIMES, SourceSpec, decay_envelopes, duhamel_future,
                                     envelope_bound, envelope_constant_check, free_evolve,
                                     free_evolve_dt, combine_sources)

# v = t^-2 exp(-|x|^2) decays in energy as t -> +inf, so it is the future
# Duhamel solution of its own source
g = lambda a, b: np.exp(-(a * a + b * b))
f = lambda t, a, b: 6 * t ** -4 * g(a, b) - t ** -2 * (4 * (a * a + b * b) - 10) * g(a, b)
dt = lambda t, a, b: -24 * t ** -5 * g(a, b) + 2 * t ** -3 * (4 * (a * a + b * b) - 10) * g(a, b)
exact = lambda t, x: t ** -2 * np.exp(-np.dot(x, x))

SRC = SourceSpec(f, q=2, p=6, dt_f=dt)


@pytest.mark.parametrize("x", [(0.0, 0, 0, 0, 0), (1.0, 0.5, 0, 0, 0), (-2.0, 0, 0.3, 0, 0)])
def test_duhamel_exact_solution(x):
    x = np.array(x)
    assert duhamel_future(SRC, 3.0, x) == pytest.approx(exact(3.0, x), rel=1e-9)


def test_duhamel_radial_kernel_agrees():
    src = SourceSpec(lambda t, r: f(t, r, 0 * r), q=2, p=6, dt_f=lambda t, r: dt(t, r, 0 * r), radial=True)
    assert duhamel_future(src, 3.0, 1.5) == pytest.approx(np.exp(-2.25) / 9, rel=1e-9)


def test_duhamel_without_dt_uses_differences():
    src = SourceSpec(f, q=2, p=6)
    x = np.array([0.5, 0.0, 0, 0, 0])
    assert duhamel_future(src, 4.0, x) == pytest.approx(exact(4.0, x), rel=1e-6)


def test_duhamel_is_linear():
    x = np.array([0.7, 0.2, 0, 0, 0])
    both = combine_sources([(2.0, SRC), (-0.5, SRC)])
    assert duhamel_future(both, 3.0, x) == pytest.approx(1.5 * duhamel_future(SRC, 3.0, x), rel=1e-12)


def test_source_validation():
    with pytest.raises(ValueError):
        SourceSpec(f, q=1.5)
    with pytest.raises(ValueError):
        SourceSpec(f, p=2.0)
    with pytest.raises(ValueError):
        SourceSpec(f, ell=1.0)


QUAD = AxisymField(lambda a, b: a * a + b * b, lambda a, b: 2 * a, lambda a, b: 2 * b,
                   lap=lambda a, b: 10 + 0 * a)
ONE = AxisymField(lambda a, b: 1 + 0 * a, lambda a, b: 0 * a, lambda a, b: 0 * a,
                  lap=lambda a, b: 0 * a)
ZERO = AxisymField(lambda a, b: 0 * a, lambda a, b: 0 * a, lambda a, b: 0 * a, lap=lambda a, b: 0 * a)


@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0, 3))
@settings(max_examples=30, deadline=None)
def test_free_evolve_polynomial(t, x1, x2):
    # |x|^2 + 5 t^2 + t solves the free wave equation with data (|x|^2, 1)
    x = np.array([x1, x2, 0, 0, 0])
    want = x1 * x1 + x2 * x2 + 5 * t * t + t
    assert free_evolve(QUAD, ONE, t, x) == pytest.approx(want, rel=1e-10, abs=1e-10)


def test_free_evolve_dt():
    x = np.array([1.0, 1.0, 0, 0, 0])
    # d_t (|x|^2 + 5 t^2) at t = 2
    assert free_evolve_dt(QUAD, ZERO, 2.0, x) == pytest.approx(20.0, rel=1e-10)


def test_free_evolve_gaussian_time_reversal():
    G = AxisymField(g, lambda a, b: -2 * a * g(a, b), lambda a, b: -2 * b * g(a, b),
                    lap=lambda a, b: (4 * (a * a + b * b) - 10) * g(a, b))
    x = np.array([0.8, 0.3, 0, 0, 0])
    assert free_evolve(G, ZERO, 1.7, x) == pytest.approx(free_evolve(G, ZERO, -1.7, x), rel=1e-12)


@pytest.mark.parametrize("q,p,kind", ENVELOPE_REGIMES)
def test_envelope_ratio_bounded(q, p, kind):
    for t, a in [(10.0, 0.0), (10.0, 50.0), (100.0, -30.0), (1e3, 1e4)]:
        J, K = decay_envelopes(t, a, q, p, 0.5)
        v = J if kind == "J" else K
        assert 0 < v / envelope_bound(t, a, q, p, kind) < 200


def test_envelope_constant_check_small():
    rng = np.random.Generator(np.random.PCG64(3))
    r = envelope_constant_check(2.0, 6.0, "J", n=20, rng=rng)
    assert r["pass"]
    assert len(r["samples_A"]) == 20


def test_envelope_input_checks():
    with pytest.raises(ValueError):
        decay_envelopes(10.0, 1.0, 1.5, 3.0, 0.5)
    with pytest.raises(ValueError):
        envelope_bound(10.0, 1.0, 2.0, 3.0, "L")
