"""
Dispersive tail of the radial interaction correction.

The sharp sources are

    f#(t, x) = t^-3 <x_l>^-3,      g#(t, x) = l t^-2 d_x1 <x_l>^-3,

with <x_l>^2 = 1 + (x1 - l t)^2/(1 - l^2) + rho^2.  Their radial 1D profile
phi_l(t, r) (the phi-transform of the sphere mean of the future Duhamel
solution) behaves like sqrt(1 - l^2) r^-3 in the regime 1 << t < r^{11/12}.

Sphere means about the origin of a comoving source use the polar variable
v = 1 - cos(theta) measured from each pole of the x1 axis, so the moving
peak at x1 = l t is resolved however large |x| is.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .fields_quadrature import (AREA_S4, TWO_PI2, QuadratureError, _sphere_nodes,
                                breakpoint_rule, fit_power_law)
from .ground_state import C_TAIL, kappa
from .linear_wave_5d import SourceSpec, duhamel_future
from .radial_reduction import phi_from_source

MODEL_PREFACTOR = 1.5 * C_TAIL       # model = -(3/2) 15^{3/2} kappa_l v#


class TailMismatch(RuntimeError):
    """Two independent evaluations of the same quantity disagree."""

    def __init__(self, msg, values):
        super().__init__(msg)
        self.values = values


def _tier(rel_tol):
    # (a/sigma panel width, polar panels); errors measured at (t, r) = (1e3, 1e5)
    if rel_tol <= 1e-12:
        return 1.0
    if rel_tol <= 1e-10:
        return 1.5
    if rel_tol <= 1e-8:
        return 2.0
    return 3.0


def _check_ell(ell):
    if not abs(ell) < 1:
        raise ValueError("|ell| must be < 1")


# -- closed-form sources --------------------------------------------------------

def _Q(xi, rho2, ell):
    return 1.0 + xi * xi / (1.0 - ell * ell) + rho2


def combination(s, xi, rho2, ell):
    """x.grad(f# + g#) + 3(f# + g#) at source time s, xi = x1 - l s."""
    g2 = 1.0 / (1.0 - ell * ell)
    q = _Q(xi, rho2, ell)
    q5 = q ** -2.5
    q7 = q5 / q
    return (3.0 * s ** -3 * q5 - 15.0 * ell * g2 * s ** -2 * xi * q7
            - 3.0 * ell * ell * g2 / s * q5 + 15.0 * ell * ell * g2 * g2 / s * xi * xi * q7)


def f_I_boundary(s, xi, rho2, ell):
    # 3 <x_l>^-5 + l s d_x1 <x_l>^-3; its sphere mean is a^-2 d_a(a^3 mean <x_l>^-3)
    q = _Q(xi, rho2, ell)
    return 3.0 * q ** -2.5 * (1.0 - ell * s * xi / (1.0 - ell * ell))


def f_I(s, xi, rho2, ell):
    """s^-1 Delta <x_l>^-3."""
    g2 = 1.0 / (1.0 - ell * ell)
    q = _Q(xi, rho2, ell)
    # Delta q^{-3/2} = -(3/2)(2 g2 + 8) q^{-5/2} + (15/4) q^{-7/2} |grad q|^2
    grad2 = 4.0 * (g2 * g2 * xi * xi + rho2)
    return (-3.0 * (g2 + 4.0) * q ** -2.5 + 3.75 * grad2 * q ** -3.5) / s


def f_II(s, xi, rho2, ell):
    return 15.0 / s * _Q(xi, rho2, ell) ** -3.5


def f_III(s, xi, rho2, ell):
    g2 = 1.0 / (1.0 - ell * ell)
    q = _Q(xi, rho2, ell)
    return 3.0 * s ** -3 * q ** -2.5 - 15.0 * ell * g2 * s ** -2 * xi * q ** -3.5


def sharp_f(t, x1, rho, ell):
    return t ** -3 * _Q(x1 - ell * t, rho * rho, ell) ** -1.5


def sharp_g(t, x1, rho, ell):
    g2 = 1.0 / (1.0 - ell * ell)
    xi = x1 - ell * t
    return -3.0 * ell * g2 * xi * t ** -2 * _Q(xi, rho * rho, ell) ** -2.5


def sharp_grad(t, x1, rho, ell):
    """(d_x1, d_rho) of f# + g#."""
    g2 = 1.0 / (1.0 - ell * ell)
    xi = x1 - ell * t
    q = _Q(xi, rho * rho, ell)
    q5 = q ** -2.5
    q7 = q5 / q
    d1 = -3.0 * g2 * xi * t ** -3 * q5 - 3.0 * ell * g2 * t ** -2 * (q5 - 5.0 * g2 * xi * xi * q7)
    dr = -3.0 * rho * t ** -3 * q5 + 15.0 * ell * g2 * xi * rho * t ** -2 * q7
    return d1, dr


def sharp_dt(t, x1, rho, ell):
    """d_t (f# + g#)."""
    g2 = 1.0 / (1.0 - ell * ell)
    xi = x1 - ell * t
    q = _Q(xi, rho * rho, ell)
    q3 = q ** -1.5
    q5 = q3 / q
    q7 = q5 / q
    df = -3.0 * t ** -4 * q3 + 3.0 * ell * g2 * xi * t ** -3 * q5
    dg = -3.0 * ell * g2 * (-ell * t ** -2 * q5 - 2.0 * xi * t ** -3 * q5
                            + 5.0 * ell * g2 * xi * xi * t ** -2 * q7)
    return df + dg


# -- sphere means about the origin ----------------------------------------------

def comoving_mean(fun, s, a, ell, step=1.0):
    """mean over |x| = a of fun(s, x1 - l s, rho^2, l), broadcasting s and a."""
    v, wv = _sphere_nodes(step)
    s = np.asarray(s, dtype=float)[..., None]
    a = np.asarray(a, dtype=float)[..., None]
    w = wv * v * (2.0 - v)
    rho2 = a * a * v * (2.0 - v)
    tot = 0.0
    for sg in (1.0, -1.0):
        xi = (sg * a - ell * s) - sg * a * v
        tot = tot + np.sum(w * fun(s, xi, rho2, ell), axis=-1)
    return tot / (2.0 * w.sum())


def _point_mean(fun, a, step=1.0):
    # mean over |x| = a of fun(x1, rho, u1, urho) with (u1, urho) the unit normal
    v, wv = _sphere_nodes(step)
    a = np.asarray(a, dtype=float)[..., None]
    w = wv * v * (2.0 - v)
    sn = np.sqrt(v * (2.0 - v))
    tot = 0.0
    for sg in (1.0, -1.0):
        u1 = sg * (1.0 - v)
        tot = tot + np.sum(w * fun(a * u1, a * sn, u1, sn), axis=-1)
    return tot / (2.0 * w.sum())


def sharp_source_mean(ell, t, r, step=1.0, path="both", tol=1e-6):
    """h(t, r) = r^2 d_r F + 3 r F, F = sphere mean of f# + g# on |x| = r.

    path "direct" differentiates the mean with the analytic gradient,
    path "combination" averages the closed-form combination; "both"
    evaluates the two and raises TailMismatch if they differ by more than
    ``tol`` (relative).
    """
    _check_ell(ell)
    if t <= 0 or r <= 0:
        raise ValueError("t and r must be positive")

    def direct():
        def radial_part(x1, rho, u1, ur):
            f = sharp_f(t, x1, rho, ell) + sharp_g(t, x1, rho, ell)
            d1, dr = sharp_grad(t, x1, rho, ell)
            return r * r * (u1 * d1 + ur * dr) + 3.0 * r * f
        return float(_point_mean(radial_part, r, step))

    def comb():
        return float(r * comoving_mean(combination, t, r, ell, step))

    if path == "direct":
        return direct()
    if path == "combination":
        return comb()
    if path != "both":
        raise ValueError(f"unknown path {path!r}")
    a, b = direct(), comb()
    scale = max(abs(a), abs(b))
    if scale > 0 and abs(a - b) > tol * scale:
        raise TailMismatch(f"sharp source mean: {a!r} vs {b!r}", (a, b))
    return b


# -- phi_l ------------------------------------------------------------------------

def _sigma_points(t, r, ell):
    al = abs(ell)
    pts = [(r - al * t) / (1.0 + al)]
    if al > 0:
        pts.append((r + al * t) / (1.0 - al))
    return [p for p in pts if p > 0]


def _phi_of(fun, ell, t, r, rel_tol):
    step = _tier(rel_tol)
    al = abs(ell)
    h = lambda s, a: a * comoving_mean(fun, s, a, al, step)
    return phi_from_source(h, t, r, q=3.0, sigma_points=_sigma_points(t, r, ell),
                           a_focus=lambda s: al * s, step=step, rel_tol=rel_tol)


def in_regime(t, r):
    # the sampling curve t = r^{11/12} itself counts as inside
    return 1.0 < t <= r ** (11.0 / 12.0) * (1.0 + 1e-9)


def phi_sharp(ell, t, r, rel_tol=1e-10, full_output=False):
    """phi_l(t, r) through the 1D reduction of the sharp source.

    phi is even in l, so |l| is used throughout.  Outside 1 < t < r^{11/12}
    the value is still computed but a warning is issued (or the flag is set
    in the returned dict when ``full_output``).
    """
    _check_ell(ell)
    if t <= 0 or r <= 0:
        raise ValueError("t and r must be positive")
    regime = in_regime(t, r)
    val = _phi_of(combination, ell, t, r, rel_tol)
    if full_output:
        return val, {"in_regime": regime, "step": _tier(rel_tol)}
    if not regime:
        warnings.warn(f"phi_sharp: (t, r) = ({t}, {r}) outside 1 < t < r^(11/12)")
    return val


def phi0_closed(t, r, rel_tol=1e-12):
    """phi_0(t, r) from its two one-dimensional integrals."""
    if t <= 0 or r <= 0:
        raise ValueError("t and r must be positive")
    step = _tier(rel_tol)
    tail = (t + r) * rel_tol ** -0.2
    S, WS = breakpoint_rule([0.0, r], step, 10, 1.0, tail=tail)
    vals = (t + S) ** -3 * ((1.0 + (r - S) ** 2) ** -1.5 - (1.0 + (r + S) ** 2) ** -1.5)
    return 0.5 * float(np.sum(WS * vals))


# -- constants -------------------------------------------------------------------

def _gamma_quad(ell, rel):
    g2 = 1.0 / (1.0 - ell * ell)

    def f(x1, rho):
        R = math.hypot(x1, rho)
        return ((g2 * (x1 - ell * R + 1) ** 2 + rho * rho) ** -1.5
                + (g2 * (x1 + ell * R + 1) ** 2 + rho * rho) ** -1.5) / R ** 4

    # polar about the origin: dx = 2 pi^2 R^4 sin^3(th) dR dth, cancelling |x|^-4
    def inner(th):
        c, s = math.cos(th), math.sin(th)
        fr = lambda R: f(R * c, R * s) * R ** 4
        pts = [1.0 / (1.0 + ell), 1.0 / (1.0 - ell)]
        a = integrate.quad(fr, 0.0, 3.0, points=pts, limit=400, epsabs=0.0, epsrel=rel)[0]
        b = integrate.quad(fr, 3.0, np.inf, limit=400, epsabs=0.0, epsrel=rel)[0]
        return s ** 3 * (a + b)

    val = integrate.quad(inner, 0.0, math.pi, limit=400, epsabs=0.0, epsrel=10 * rel,
                         points=[math.pi - 1e-3, math.pi - 1e-2, math.pi - 0.1])[0]
    return 3.0 / (8.0 * math.pi ** 2 * ell * ell) * TWO_PI2 * val


def _theta_quad(ell, rel):
    g2 = 1.0 / (1.0 - ell * ell)
    h = math.sqrt(1.0 - ell * ell)
    f = lambda rho, x1: (g2 * x1 * x1 + rho * rho + 1.0) ** -3.5 * rho ** 3
    inner = lambda x1: integrate.quad(f, 0.0, np.inf, args=(x1,), epsabs=0.0, epsrel=rel, limit=200)[0]
    # even in x1; the x1-width of the integrand is sqrt(1 - l^2)
    val = 2.0 * (integrate.quad(inner, 0.0, 5.0 * h, epsabs=0.0, epsrel=rel, limit=200)[0]
                 + integrate.quad(inner, 5.0 * h, np.inf, epsabs=0.0, epsrel=rel, limit=200)[0])
    return 15.0 * (1.0 + 3.0 / (ell * ell)) / (8.0 * math.pi ** 2) * TWO_PI2 * val


@lru_cache(maxsize=64)
def constants_gamma_theta(ell, rel=1e-10):
    """(Gamma(l), Theta(l), Theta - Gamma) by quadrature of their integral
    definitions; the closed forms are 3 l^-2 sqrt(1-l^2) and
    (3 l^-2 + 1) sqrt(1-l^2)."""
    if not 0 < ell < 1:
        raise ValueError("need 0 < ell < 1")
    with warnings.catch_warnings():
        # the inner radial rule hits round-off near theta = pi; the outer
        # tolerance still holds
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        G = _gamma_quad(ell, rel)
        T = _theta_quad(ell, rel)
    return G, T, T - G


def gamma_closed(ell):
    return 3.0 * math.sqrt(1.0 - ell * ell) / (ell * ell)


def theta_closed(ell):
    return (3.0 / (ell * ell) + 1.0) * math.sqrt(1.0 - ell * ell)


# -- decomposition ------------------------------------------------------------------

@dataclass
class Decomposition:
    ell: float
    t: float
    r: float
    phi_I1: float
    phi_I2: float
    phi_I3: float
    phi_II: float
    phi_III: float
    phi: float

    @property
    def phi_I(self):
        return self.phi_I1 + self.phi_I2 + self.phi_I3

    @property
    def total(self):
        return self.phi_I + self.phi_II + self.phi_III

    @property
    def rel_mismatch(self):
        return abs(self.total - self.phi) / abs(self.phi)


def _phi_I_parts(ell, t, r, step, rel_tol):
    # phi^I = 1/2 int (t+sigma)^-1 [mean B]_{|r-sigma|}^{r+sigma} dsigma, split by the
    # upper limit, the lower limit for sigma < r and the lower limit for sigma > r
    al = abs(ell)
    smax = (t + r) * rel_tol ** -0.5
    up_pts = [0.0, r] + _sigma_points(t, r, ell)
    S, WS = breakpoint_rule(up_pts, step, 10, 1.0, tail=smax)
    B = lambda s, a: comoving_mean(f_I_boundary, s, a, al, step)
    p1 = 0.5 * float(np.sum(WS * B(t + S, r + S) / (t + S)))
    lo = S < r
    p2 = -0.5 * float(np.sum(WS[lo] * B(t + S[lo], r - S[lo]) / (t + S[lo])))
    hi = ~lo
    p3 = -0.5 * float(np.sum(WS[hi] * B(t + S[hi], S[hi] - r) / (t + S[hi])))
    return p1, p2, p3


def appendix_decomposition(ell, t, r, rel_tol=1e-10, tol=1e-4, phi=None):
    """phi^{I,1}, phi^{I,2}, phi^{I,3}, phi^II, phi^III each by its own integral,
    checked against phi_sharp (TailMismatch beyond ``tol`` relative)."""
    if not 0 < ell < 1:
        raise ValueError("need 0 < ell < 1")
    step = _tier(rel_tol)
    p1, p2, p3 = _phi_I_parts(ell, t, r, step, rel_tol)
    p_II = _phi_of(f_II, ell, t, r, rel_tol)
    p_III = _phi_of(f_III, ell, t, r, rel_tol)
    if phi is None:
        phi = _phi_of(combination, ell, t, r, rel_tol)
    d = Decomposition(ell, t, r, p1, p2, p3, p_II, p_III, phi)
    if d.rel_mismatch > tol:
        raise TailMismatch(f"decomposition sum {d.total!r} vs phi {phi!r}", d)
    return d


def phi_III(ell, t, r, rel_tol=1e-10):
    return _phi_of(f_III, ell, t, r, rel_tol)


# -- sources for the 5D route ---------------------------------------------------------

def sharp_source_spec(ell):
    """f# + g# as an axisymmetric SourceSpec (analytic d_t)."""
    _check_ell(ell)
    f = lambda t, x1, rho: sharp_f(t, x1, rho, ell) + sharp_g(t, x1, rho, ell)
    dt = lambda t, x1, rho: sharp_dt(t, x1, rho, ell)
    d1 = lambda t, x1, rho: sharp_grad(t, x1, rho, ell)[0]
    return SourceSpec(f, q=2.0, p=3.0, ell=ell, dt_f=dt, d1_f=d1, name="sharp")


def sharp_source_radial(ell, step=1.0):
    """Sphere mean (about the origin) of f# + g# as a radial SourceSpec.

    Spherical means commute with the wave propagator, so the future Duhamel
    solution of this source is the sphere mean of v#.
    """
    _check_ell(ell)
    al = abs(ell)

    def _fg(s, xi, rho2, l):
        q = _Q(xi, rho2, l)
        g2 = 1.0 / (1.0 - l * l)
        return s ** -3 * q ** -1.5 - 3.0 * l * g2 * xi * s ** -2 * q ** -2.5

    def _dt(s, xi, rho2, l):
        g2 = 1.0 / (1.0 - l * l)
        q = _Q(xi, rho2, l)
        q3 = q ** -1.5
        q5 = q3 / q
        q7 = q5 / q
        df = -3.0 * s ** -4 * q3 + 3.0 * l * g2 * xi * s ** -3 * q5
        dg = -3.0 * l * g2 * (-l * s ** -2 * q5 - 2.0 * xi * s ** -3 * q5
                              + 5.0 * l * g2 * xi * xi * s ** -2 * q7)
        return df + dg

    f = lambda t, a: comoving_mean(_fg, t, a, al, step)
    dt = lambda t, a: comoving_mean(_dt, t, a, al, step)
    return SourceSpec(f, q=2.0, p=3.0, ell=al, dt_f=dt, radial=True, name="sharp-mean")


def v_sharp(ell, t, x, step=1.0, rel_tol=1e-10):
    """v#_l(t, x): future Duhamel solution of f# + g#."""
    return duhamel_future(sharp_source_spec(ell), t, x, step=step, rel_tol=rel_tol)


def model_correction(ell, t, x, step=1.0, rel_tol=1e-10):
    """Leading-order model -(3/2) 15^{3/2} kappa_l v#_l(t, x) of v_l."""
    return -MODEL_PREFACTOR * kappa(ell) * v_sharp(ell, t, x, step, rel_tol)


def averaged_V(ell, t, r, step=1.0, rel_tol=1e-10):
    """Sphere mean of v#_l on |x| = r via the radial Duhamel kernel."""
    return duhamel_future(sharp_source_radial(ell, step), t, r, step=step, rel_tol=rel_tol)


def phi_via_duhamel(ell, t, r, step=1.0, rel_tol=1e-12, h=None):
    """phi = r^2 V' + 3 r V with V = averaged_V, V' by a 5-point stencil."""
    h = 0.02 * r if h is None else h
    V = lambda rr: averaged_V(ell, t, rr, step, rel_tol)
    v0 = V(r)
    dv = (V(r - 2 * h) - 8 * V(r - h) + 8 * V(r + h) - V(r + 2 * h)) / (12 * h)
    return r * r * dv + 3.0 * r * v0


# -- sweeps --------------------------------------------------------------------------------

@dataclass
class TailResult:
    ell: float
    samples: list
    fitted_coefficient: float
    reference: float = field(default=float("nan"))
    rel_deviation: float = field(default=float("nan"))
    plain_extrapolation: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.reference):
            self.reference = math.sqrt(1.0 - self.ell ** 2)
        self.rel_deviation = abs(self.fitted_coefficient - self.reference) / self.reference

    def as_dict(self):
        return {"ell": self.ell, "fitted_coefficient": self.fitted_coefficient,
                "reference": self.reference, "rel_deviation": self.rel_deviation,
                "plain_extrapolation": self.plain_extrapolation,
                "samples": [list(s) for s in self.samples]}


def extrapolate_coefficient(samples):
    """Coefficient c in phi ~ c (t + r)^-3 from samples (t, r, phi).

    y = (r^3 phi)^{-1/3} is close to c^{-1/3} (1 + t/r); a polynomial in
    x = t/r through the samples (degree n-1, at most 2) is evaluated at x = 0.
    The second value is the same extrapolation applied to r^3 phi directly.
    """
    t, r, p = (np.array(c, dtype=float) for c in zip(*samples))
    x = t / r
    z = r ** 3 * p
    if np.any(z <= 0):
        raise ValueError("r^3 phi must be positive to extrapolate")
    deg = min(2, len(x) - 1)
    y0 = np.polyval(np.polyfit(x, z ** (-1.0 / 3.0), deg), 0.0)
    plain = np.polyval(np.polyfit(x, z, deg), 0.0)
    return float(y0 ** -3), float(plain)


def tail_sweep(ell, radii, times=None, rel_tol=1e-10):
    """r^3 phi_l along t = r^{11/12} (or the given times) plus extrapolation."""
    radii = [float(r) for r in radii]
    times = [r ** (11.0 / 12.0) for r in radii] if times is None else [float(t) for t in times]
    if len(times) != len(radii):
        raise ValueError("times and radii must have the same length")
    samples = []
    for t, r in zip(times, radii):
        samples.append((t, r, phi_sharp(ell, t, r, rel_tol)))
    coef, plain = extrapolate_coefficient(samples)
    return TailResult(ell, samples, coef, plain_extrapolation=plain)


def phi_III_slope(ell, r, times, rel_tol=1e-10):
    """Power-law fit of |phi^III(t, r)| in t at fixed r."""
    return fit_power_law([(t, abs(phi_III(ell, t, r, rel_tol))) for t in times])
