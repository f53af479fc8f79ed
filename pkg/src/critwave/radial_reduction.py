"""
Radial 5D waves <-> half-line 1D waves.

If V(t, r) is a radial solution of (d_t^2 - Delta) V = F in R^5 then
phi = r^2 d_r V + 3 r V solves the 1D wave equation on r > 0 with a zero
Dirichlet condition at r = 0 (and source r^2 d_r F + 3 r F).  The map has
the one-dimensional kernel r^{-3}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .fields_quadrature import (AREA_S4, AxisymField, RadialProfile,
                                breakpoint_rule, focus_rule, fd_step,
                                gauss_legendre, spherical_mean)


# -- phi map -------------------------------------------------------------------

def to_phi(V: RadialProfile) -> RadialProfile:
    r"""phi = r^2 V' + 3 r V on V's grid (exact callable if V wraps one)."""
    if V.fn is not None:
        fn = lambda r: r * r * V.derivative(r) + 3.0 * r * V(r)
        return RadialProfile.from_callable(fn, V.grid)
    g = V.grid
    return RadialProfile(g, g * g * V.derivative(g) + 3.0 * g * V(g), order=V.order)


def from_phi(phi: RadialProfile, tol=1e-10) -> RadialProfile:
    """Decaying-branch inverse V(r) = r^{-3} int_0^r s phi(s) ds.

    Uses (r^3 V)' = r phi.  The grid must start at 0 and phi(0) must vanish;
    at r = 0 the limit phi'(0)/3 is used.
    """
    g = phi.grid
    if g[0] != 0.0:
        raise ValueError("from_phi needs a grid starting at r = 0")
    vals = phi(g)
    if abs(vals[0]) > tol * max(1.0, float(np.max(np.abs(vals)))):
        raise ValueError("phi must vanish at r = 0 (Dirichlet)")
    gx, gw = gauss_legendre(8)
    a, b = g[:-1, None], g[1:, None]
    s = (a + b) / 2 + (b - a) / 2 * gx
    w = (b - a) / 2 * gw
    pieces = np.sum(w * s * phi(s), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    V = np.empty_like(g)
    V[1:] = cum[1:] / g[1:] ** 3
    V[0] = float(phi.derivative(np.array([0.0]))[0]) / 3.0
    return RadialProfile(g, V, order=phi.order)


# -- Duhamel double integral ----------------------------------------------------

class DivergentTail(ValueError):
    pass


def sigma_cutoff(t, r, q, rel_tol=1e-12):
    """sigma* beyond which a (t+sigma)^{-q} source contributes below rel_tol.

    The a-interval has length <= 2 min(r, sigma), so the tail beyond sigma*
    is bounded by const * (t + sigma*)^{1-q}; we pick sigma* so that this is
    rel_tol times the same bound at sigma = t + r.
    """
    if q <= 1.0:
        raise DivergentTail(f"time decay exponent {q} <= 1: sigma-integral diverges")
    return (t + r) * rel_tol ** (-1.0 / (q - 1.0))


def phi_from_source(h, t, r, q=3.0, sigma_points=(), a_focus=None, step=1.0,
                    antiderivative=None, rel_tol=1e-12, chunk=4000, full_output=False):
    r"""phi(t, r) = 1/2 int_0^inf int_{|r-s|}^{r+s} h(t+s, a) da ds.

    h(s, a) must be vectorised.  ``q`` is the declared decay of h in its
    first argument; it sets the sigma truncation.  ``sigma_points`` are
    extra sigma breakpoints (for instance where the inner interval meets a
    moving peak) and ``a_focus(s)`` returns a-points near which h(s, .)
    concentrates (a single point gives a rule mapped outwards from it, several
    points a rule refined at each).  Sigma = r, where the inner interval
    degenerates, is always a breakpoint.  With ``antiderivative`` H(s, a) = int^a h(s, .) the inner
    integral collapses to a difference of two values.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    smax = sigma_cutoff(t, r, q, rel_tol)
    pts = [0.0, r] + [p for p in sigma_points if 0.0 < p < smax]
    S, WS = breakpoint_rule(pts, step, 10, 1.0, tail=smax)

    if antiderivative is not None:
        s = t + S
        inner = antiderivative(s, r + S) - antiderivative(s, np.abs(r - S))
        val = 0.5 * float(np.sum(WS * inner))
        return (val, {"sigma_max": smax, "nodes": S.size}) if full_output else val

    A_all, W_all, T_all = [], [], []
    for s, ws in zip(S, WS):
        lo, hi = abs(r - s), r + s
        foc = [lo] if a_focus is None else [float(c) for c in np.atleast_1d(a_focus(t + s))]
        if len(foc) == 1:
            # one peak: map outwards from it (it may sit outside [lo, hi])
            A, WA = focus_rule(lo, hi, foc[0], step, 10, 1.0)
        else:
            foc = [c for c in foc if lo < c < hi]
            A, WA = breakpoint_rule([lo] + foc + [hi], step, 10, 1.0)
        A_all.append(A)
        W_all.append(WA * ws)
        T_all.append(np.full(A.shape, t + s))
    A = np.concatenate(A_all)
    Wt = np.concatenate(W_all)
    T = np.concatenate(T_all)
    tot = 0.0
    for i in range(0, A.size, chunk):
        tot += float(np.sum(Wt[i:i + chunk] * h(T[i:i + chunk], A[i:i + chunk])))
    val = 0.5 * tot
    if not math.isfinite(val):
        raise DivergentTail("non-finite phi estimate")
    if full_output:
        return val, {"sigma_max": smax, "nodes": A.size}
    return val


# -- half-line d'Alembert ---------------------------------------------------------

@dataclass(frozen=True)
class HalfLineWaveState:
    """(phi, d_t phi) on r >= 0; both vanish at 0.  Outside their grids the
    profiles are taken to be zero (compactly supported data)."""
    phi0: RadialProfile
    phi1: RadialProfile
    t: float = 0.0

    def __post_init__(self):
        for p in (self.phi0, self.phi1):
            if p.grid[0] != 0.0:
                raise ValueError("half-line profiles must start at r = 0")
            v0 = float(p(np.array([0.0]))[0])
            if abs(v0) > 1e-10 * max(1.0, float(np.max(np.abs(p.values)))):
                raise ValueError("Dirichlet condition violated at r = 0")

    def energy(self):
        """int_0^inf (d_t phi)^2 + (d_r phi)^2 dr."""
        e1 = self.phi1.integrate(lambda r: self.phi1(r) ** 2)
        e0 = self.phi0.integrate(lambda r: self.phi0.derivative(r) ** 2)
        return e0 + e1


def _odd_eval(p: RadialProfile, s):
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    inside = a <= p.grid[-1] if p.fn is None else np.ones_like(a, dtype=bool)
    v = np.zeros_like(a)
    if np.any(inside):
        v[inside] = p(a[inside])
    return np.sign(s) * v


def _odd_deriv(p: RadialProfile, s):
    # derivative of an odd function is even
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    inside = a <= p.grid[-1] if p.fn is None else np.ones_like(a, dtype=bool)
    v = np.zeros_like(a)
    if np.any(inside):
        v[inside] = p.derivative(a[inside])
    return v


def _even_antideriv(p: RadialProfile):
    """F(s) = int_0^{|s|} p, which is even; int_a^b odd(p) = F(b) - F(a)."""
    if p.fn is None:
        spline = p._spline.antiderivative()
        base = float(spline(0.0))
        top = float(spline(p.grid[-1])) - base

        def F(s):
            a = np.abs(np.asarray(s, dtype=float))
            return np.where(a >= p.grid[-1], top, spline(np.minimum(a, p.grid[-1])) - base)
        return F

    def F(s):
        a = np.abs(np.asarray(s, dtype=float))
        return np.vectorize(lambda x: integrate.quad(lambda u: float(p(np.array([u]))[0]), 0.0, x,
                                                     limit=200)[0])(a)
    return F


def dalembert_eval(state: HalfLineWaveState, t, r):
    """(phi, d_t phi) at time state.t + t and radii r, by odd reflection."""
    r = np.asarray(r, dtype=float)
    P1 = _even_antideriv(state.phi1)
    p = 0.5 * (_odd_eval(state.phi0, r + t) + _odd_eval(state.phi0, r - t)) \
        + 0.5 * (P1(r + t) - P1(r - t))
    dp = 0.5 * (_odd_deriv(state.phi0, r + t) - _odd_deriv(state.phi0, r - t)) \
        + 0.5 * (_odd_eval(state.phi1, r + t) + _odd_eval(state.phi1, r - t))
    return p, dp


def dalembert_halfline(state: HalfLineWaveState, t, grid=None) -> HalfLineWaveState:
    """Exact evolution by t; the new profiles live on ``grid`` (default: the
    old grid extended by t so that outgoing data is not clipped)."""
    if t == 0:
        return state
    if grid is None:
        g = state.phi0.grid
        h = g[-1] - g[-2]
        extra = np.arange(g[-1] + h, g[-1] + abs(t) + h, h)
        grid = np.concatenate([g, extra])
    p, dp = dalembert_eval(state, t, grid)
    p[0] = 0.0
    dp[0] = 0.0
    return HalfLineWaveState(RadialProfile(grid, p, order=state.phi0.order),
                             RadialProfile(grid, dp, order=state.phi1.order), state.t + t)


# -- spherical averages of solution families ----------------------------------------

def radial_wave_residual(U, t, r, h=None):
    """d_t^2 U - U_rr - (4/r) U_r by centred differences for U(t, r)."""
    t = float(t)
    r = np.asarray(r, dtype=float)
    ht = 1e-3 * max(1.0, abs(t)) if h is None else h
    hr = 1e-3 * np.maximum(1.0, r) if h is None else h
    utt = (U(t + ht, r) - 2 * U(t, r) + U(t - ht, r)) / ht ** 2
    urr = (U(t, r + hr) - 2 * U(t, r) + U(t, r - hr)) / hr ** 2
    ur = (U(t, r + hr) - U(t, r - hr)) / (2 * hr)
    return utt - urr - 4.0 * ur / r


def sphere_average_solution(u, times, radii, check=True, step=1.0):
    """Spherical means U(t, r) of an axisymmetric family u(t) -> AxisymField.

    Returns a dict with one RadialProfile per time and, if ``check``, the
    finite-difference residual of the radial 5D wave operator on U at each
    time (interior radii).  Radial input is returned unchanged up to
    quadrature error.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")

    def U(t, r):
        f = u(t)
        return np.asarray(spherical_mean(f, r, step=step))

    prof = [RadialProfile(radii, U(t, radii), order=min(5, radii.size - 1)) for t in times]
    out = {"times": list(times), "profiles": prof}
    if check:
        out["residual"] = [np.asarray(radial_wave_residual(U, t, radii)) for t in times]
    return out
