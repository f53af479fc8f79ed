"""5D linear waves by spherical means.

free_evolve      : cos(t sqrt(-D)) g + sin(t sqrt(-D))/sqrt(-D) h at one point
duhamel_future   : the solution of (d_t^2 - D) v = f that vanishes in energy
                   as t -> +inf, written as a future-time integral
decay_envelopes  : the envelope integrals J(t,a), K(t,a) that bound |v|, |grad v|
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fields_quadrature import (AREA_S4, AxisymField, breakpoint_rule, focus_rule,
                                gauss_legendre, panel_rule, polar_rule, sphere_points)


# ----------------------------------------------------------------------------------
# sphere means about an arbitrary point
# ----------------------------------------------------------------------------------

def _angle_rule(n=40, order=10):
    # (theta, psi) tensor rule on [0,pi]^2 for the weight sin^3(th) sin^2(psi)
    th, wt = panel_rule(0.0, math.pi, n, order)
    ps, wp = panel_rule(0.0, math.pi, n // 2, order)
    wt = wt * np.sin(th) ** 3
    wp = wp * np.sin(ps) ** 2
    wt /= wt.sum()
    wp /= wp.sum()
    return th, wt, ps, wp


def sphere_samples(x1, rho0, s, step=1.0, n_angles=40):
    """Points (y1, |ybar|), unit normals and weights on |y - x| = s.

    x = (x1, rho0 e2, 0, 0, 0).  On the axis (rho0 = 0) the pole-refined
    polar rule is used; otherwise a (theta, psi) product rule, psi being the
    angle between the transverse part of the normal and e2.
    Returns y1, yr, n1, nr, w where n1 = d y1 / d s and nr = d |ybar| / d s.
    """
    s = np.asarray(s, dtype=float)
    if rho0 == 0.0:
        X1, R, w = sphere_points(s, step)
        n1 = (X1) / np.maximum(s[..., None], 1e-300)
        nr = R / np.maximum(s[..., None], 1e-300)
        return x1 + X1, R, n1, nr, w
    th, wt, ps, wp = _angle_rule(n_angles)
    TH, PS = np.meshgrid(th, ps, indexing="ij")
    W = (wt[:, None] * wp[None, :]).ravel()
    c, sn, cp = np.cos(TH).ravel(), np.sin(TH).ravel(), np.cos(PS).ravel()
    S = s[..., None]
    y1 = x1 + S * c
    yr2 = rho0 ** 2 + 2.0 * rho0 * S * sn * cp + (S * sn) ** 2
    yr = np.sqrt(np.maximum(yr2, 0.0))
    n1 = np.broadcast_to(c, y1.shape)
    safe = np.where(yr == 0, 1.0, yr)
    nr = np.where(yr == 0, 0.0, (rho0 * sn * cp + S * sn * sn) / safe)
    return y1, yr, n1, nr, np.broadcast_to(W, y1.shape)


def sphere_mean_at(f: AxisymField, x1, rho0, s, what="f", step=1.0):
    """Mean of f (what='f'), of its outward normal derivative ('dn') or of
    its Laplacian ('lap') over |y - x| = s."""
    y1, yr, n1, nr, w = sphere_samples(x1, rho0, s, step)
    if what == "f":
        vals = f(y1, yr)
    elif what == "dn":
        vals = n1 * f.d_x1(y1, yr) + nr * f.d_rho(y1, yr)
    elif what == "lap":
        vals = f.laplacian(y1, yr)
    else:
        raise ValueError(what)
    return np.sum(w * vals, axis=-1)


def _split_point(x):
    if np.ndim(x) == 0:
        return float(x), 0.0
    x = np.asarray(x, dtype=float)
    if x.shape == (2,):
        return float(x[0]), abs(float(x[1]))
    if x.shape == (5,):
        return float(x[0]), float(np.linalg.norm(x[1:]))
    raise ValueError("point must be x1, (x1, rho) or a 5-vector")


# ----------------------------------------------------------------------------------
# homogeneous problem
# ----------------------------------------------------------------------------------

def free_evolve(g: AxisymField, h: AxisymField, t, x, step=1.0):
    """Solution at (t, x) of the free 5D wave equation with data (g, h).

    z = M_g + (5/3) t M_g' + (1/3) t^2 M_g'' + t M_h + (1/3) t^2 M_h'
    with M_f(t) the sphere mean about x and ' = d/dt; M'' is eliminated
    through the Darboux relation M'' = M_{Delta f} - (4/t) M'.
    """
    if t == 0:
        x1, r0 = _split_point(x)
        return float(g(np.array(x1), np.array(r0)))
    sgn = 1.0 if t > 0 else -1.0
    T = abs(t)
    x1, r0 = _split_point(x)
    Mg = sphere_mean_at(g, x1, r0, T, "f", step)
    dMg = sphere_mean_at(g, x1, r0, T, "dn", step)
    Lg = sphere_mean_at(g, x1, r0, T, "lap", step)
    Mh = sphere_mean_at(h, x1, r0, T, "f", step)
    dMh = sphere_mean_at(h, x1, r0, T, "dn", step)
    d2Mg = Lg - 4.0 * dMg / T
    z = Mg + (5.0 / 3.0) * T * dMg + (T * T / 3.0) * d2Mg + sgn * (T * Mh + (T * T / 3.0) * dMh)
    return float(z)


def free_evolve_dt(g: AxisymField, h: AxisymField, t, x, lap_g: Optional[AxisymField] = None, step=1.0):
    """d_t z: the same formula with data (h, Delta g)."""
    lg = lap_g if lap_g is not None else AxisymField(g.laplacian, centers=g.centers)
    return free_evolve(h, lg, t, x, step)


# ----------------------------------------------------------------------------------
# sources and the future Duhamel integral
# ----------------------------------------------------------------------------------

@dataclass
class SourceSpec:
    """Time-dependent source with the declared envelope
    |A_ell^m f| <= C t^{-(q+m)} <x_ell>^{-p},  A_ell = d_t + ell d_x1.

    ``f(t, x1, rho)`` is vectorised.  ``dt_f`` is optional; otherwise it is
    assembled from ``A_f`` (the co-moving derivative) as A_f - ell d_x1 f
    when given, else by centred differences in t.  A radial source
    (``radial=True``) is called as f(t, r) and uses the 1D kernel.
    """
    f: Callable
    q: float = 3.0
    p: float = 3.0
    ell: float = 0.0
    dt_f: Optional[Callable] = None
    A_f: Optional[Callable] = None
    d1_f: Optional[Callable] = None
    radial: bool = False
    C: Optional[float] = None
    name: str = "source"

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be >= 2")
        if not self.p > 2:
            raise ValueError("p must be > 2")
        if not abs(self.ell) < 1:
            raise ValueError("|ell| must be < 1")

    def time_derivative(self, t, *xs):
        if self.dt_f is not None:
            return self.dt_f(t, *xs)
        if self.A_f is not None and not self.radial:
            x1, rho = xs
            if self.d1_f is not None:
                d1 = self.d1_f(t, x1, rho)
            else:
                hx = np.maximum(1e-5, 1e-5 * np.abs(x1))
                d1 = (self.f(t, x1 + hx, rho) - self.f(t, x1 - hx, rho)) / (2 * hx)
            return self.A_f(t, x1, rho) - self.ell * d1
        ht = np.maximum(1e-5, 1e-5 * np.abs(t))
        return (self.f(t + ht, *xs) - self.f(t - ht, *xs)) / (2 * ht)

    def envelope(self, t, x1, rho):
        g2 = 1.0 / (1.0 - self.ell ** 2)
        xl = np.sqrt(1.0 + g2 * (x1 - self.ell * t) ** 2 + rho ** 2)
        return t ** (-self.q) * xl ** (-self.p)

    def __add__(self, other):
        return combine_sources([(1.0, self), (1.0, other)])

    def scaled(self, c):
        return combine_sources([(c, self)])


def combine_sources(terms):
    """Linear combination sum c_i f_i of sources sharing ell and radial-ness."""
    base = terms[0][1]
    ell, radial = base.ell, base.radial
    for _, s in terms:
        if s.radial != radial:
            raise ValueError("cannot mix radial and axisymmetric sources")
    f = lambda t, *x: sum(c * s.f(t, *x) for c, s in terms)
    dt = lambda t, *x: sum(c * s.time_derivative(t, *x) for c, s in terms)
    q = min(s.q for _, s in terms)
    p = min(s.p for _, s in terms)
    C = None
    if all(s.C is not None for _, s in terms):
        C = sum(abs(c) * s.C for c, s in terms)
    return SourceSpec(f, q, p, ell, dt_f=dt, radial=radial, C=C, name="combination")


@dataclass
class DuhamelResult:
    value: float
    s_max: float
    nodes: int
    warnings: list = field(default_factory=list)

    def __float__(self):
        return self.value


def future_cutoff(t, src: SourceSpec, scale, rel_tol=1e-12):
    """s* such that the envelope tail int_{s*}^inf s^{1-min(p,4)}(t+s)^{-q} ds
    (what is left of |s f| + |s^2 d_t f| after the sphere mean) is below
    rel_tol times its value from s = scale."""
    k = src.q + min(src.p, 4.0) - 1.0      # integrand ~ s^{-k}
    if k <= 1.0:
        raise ValueError("envelope tail does not converge")
    base = max(scale, t, 1.0)
    return base * rel_tol ** (-1.0 / (k - 1.0))


def _s_breaks(x1, rho0, t, ell):
    # radii at which the sphere about x meets the moving center ell (t+s) e1
    pts = []
    for sgn in (1.0, -1.0):
        den = 1.0 + sgn * ell
        s = sgn * (x1 - ell * t) / den
        if s > 0:
            pts.append(math.hypot(s, rho0) if rho0 else s)
    return pts


def duhamel_future(src: SourceSpec, t, x, step=1.0, rel_tol=1e-12, full_output=False,
                   check_envelope=False, chunk=4000):
    r"""v(t, x) = (1/3) int_0^inf mean_{|y|=s} [ s f(t+s, x+y) - s^2 d_t f(t+s, x+y) ] ds.

    Axisymmetric sources use sphere means about x (on- or off-axis); radial
    sources use the kernel mean_{|y|=s} F(|x+y|) =
    (3/4) int_{|r-s|}^{r+s} F(a) (1 - c^2) a/(r s) da, c = (a^2 - r^2 - s^2)/(2 r s),
    which resolves spherical shells far from the poles.
    """
    notes = []
    if src.radial:
        r = abs(_split_point(x)[0]) if np.ndim(x) == 0 else float(np.linalg.norm(np.atleast_1d(x)))
        return _duhamel_radial(src, t, r, step, rel_tol, full_output, check_envelope, chunk)
    x1, r0 = _split_point(x)
    scale = math.hypot(x1, r0) + 1.0
    smax = future_cutoff(t, src, scale, rel_tol)
    pts = [0.0] + [p for p in _s_breaks(x1, r0, t, src.ell) if p < smax]
    S, WS = breakpoint_rule(pts, step, 10, 1.0, tail=smax)
    tot = 0.0
    for i in range(0, S.size, max(1, chunk // 1000)):
        s = S[i:i + max(1, chunk // 1000)]
        y1, yr, *_, w = sphere_samples(x1, r0, s, step)
        T = (t + s)[:, None]
        vals = s[:, None] * src.f(T, y1, yr) - (s * s)[:, None] * src.time_derivative(T, y1, yr)
        if check_envelope and src.C is not None:
            env = src.C * src.envelope(T, y1, yr)
            if np.any(np.abs(src.f(T, y1, yr)) > 1.001 * env):
                notes.append("envelope violated")
        tot += float(np.sum(WS[i:i + s.size, None] * w * vals))
    val = tot / 3.0
    if full_output:
        return DuhamelResult(val, smax, S.size, sorted(set(notes)))
    if notes:
        warnings.warn("duhamel_future: " + "; ".join(sorted(set(notes))))
    return val


def _duhamel_radial(src, t, r, step, rel_tol, full_output, check_envelope, chunk):
    if r <= 0:
        raise ValueError("radial Duhamel needs r > 0")
    smax = future_cutoff(t, src, r + 1.0, rel_tol)
    ell = abs(src.ell)
    pts = [0.0, r]
    for den in (1.0 + ell, 1.0 - ell):
        for num in (r - ell * t, r + ell * t, ell * t - r):
            p = num / den
            if 0 < p < smax:
                pts.append(p)
    S, WS = breakpoint_rule(pts, step, 10, 1.0, tail=smax)
    A_all, W_all, T_all, S_all = [], [], [], []
    for s, ws in zip(S, WS):
        lo, hi = abs(r - s), r + s
        foc = [c for c in (ell * (t + s),) if lo < c < hi]
        A, WA = breakpoint_rule([lo] + foc + [hi], step, 10, 1.0)
        c = (A * A - r * r - s * s) / (2.0 * r * s)
        A_all.append(A)
        W_all.append(ws * WA * 0.75 * (1.0 - c * c) * A / (r * s))
        T_all.append(np.full(A.shape, t + s))
        S_all.append(np.full(A.shape, s))
    A = np.concatenate(A_all)
    Wt = np.concatenate(W_all)
    T = np.concatenate(T_all)
    Sx = np.concatenate(S_all)
    tot = 0.0
    for i in range(0, A.size, chunk):
        sl = slice(i, i + chunk)
        vals = Sx[sl] * src.f(T[sl], A[sl]) - Sx[sl] ** 2 * src.time_derivative(T[sl], A[sl])
        tot += float(np.sum(Wt[sl] * vals))
    val = tot / 3.0
    if full_output:
        return DuhamelResult(val, smax, A.size, [])
    return val


# ----------------------------------------------------------------------------------
# envelopes J, K
# ----------------------------------------------------------------------------------

def _bracket_mean(c, s, p, step):
    """mean over |w| = 1 of <c e1 + s w>^{-p} for arrays c, s (pole refined)."""
    v, wv = polar_rule(1e-22, {1.0: 46, 1.5: 30, 2.0: 24}.get(step, 18), 10)
    w = wv * v * (2.0 - v)
    tot = 0.0
    for sg in (1.0, -1.0):
        # point on the sphere: (c + sg s (1 - v), s sqrt(v(2-v)))
        x1 = c[..., None] + sg * s[..., None] * (1.0 - v)
        q = 1.0 + x1 * x1 + (s[..., None] ** 2) * v * (2.0 - v)
        tot = tot + np.sum(w * q ** (-p / 2.0), axis=-1)
    return tot / (2.0 * w.sum())


def decay_envelopes(t, a, q, p, ell, step=1.5, rel_tol=1e-12):
    """J(t, a e1) and K(t, a e1) by quadrature in |y| = s and the polar angle:

      J = (8 pi^2/3) int_0^inf s (t+s)^{-q} mean <(a - ell s) e1 + s w>^{-p} ds
      K = (8 pi^2/3) int_0^inf   (t+s)^{-q} mean <(a - ell s) e1 + s w>^{-p} ds
    """
    a = float(np.atleast_1d(a)[0]) if np.ndim(a) else float(a)
    if q < 2 or p <= 2:
        raise ValueError("need q >= 2 and p > 2")
    if not abs(ell) < 1:
        raise ValueError("|ell| must be < 1")
    k = q - 1.0 + min(p, 4.0)
    smax = (abs(a) + t + 1.0) * rel_tol ** (-1.0 / (k - 1.0))
    pts = [0.0]
    for den in (1.0 + ell, 1.0 - ell):
        for num in (a, -a):
            if num / den > 0:
                pts.append(num / den)
    S, WS = breakpoint_rule(pts, step, 10, 1.0, tail=smax)
    m = _bracket_mean(a - ell * S, S, p, step)
    base = (t + S) ** (-q) * m * WS
    return AREA_S4 * float(np.sum(S * base)), AREA_S4 * float(np.sum(base))


def envelope_bound(t, a, q, p, kind="J"):
    """Right-hand sides of the J / K envelope estimates (constant omitted).

    J, 2 < p < 5, q = 2 : (t+<a>)^-2 <a>^-(p-2) log(2 + <a>/t)
    J, 2 < p < 5, q > 2 : (t+<a>)^-2 t^-(q-2) <a>^-(p-2)
    J, p > 5            : (t+<a>)^-2 t^-(q-2) <a>^-3
    K, p > 5            : (t+<a>)^-1 t^-(q-1) <a>^-4
    K, 2 < p < 5        : (t+<a>)^-1 t^-(q-1) <a>^-(p-1)
    """
    ja = math.sqrt(1.0 + a * a)
    if kind == "J":
        if p < 5:
            b = (t + ja) ** -2 * ja ** (-(p - 2))
            return b * math.log(2.0 + ja / t) if q == 2 else b * t ** (-(q - 2))
        if p == 5:
            return (t + ja) ** -2 * t ** (-(q - 2)) * ja ** -3 * math.log(1.0 + ja)
        return (t + ja) ** -2 * t ** (-(q - 2)) * ja ** -3
    if kind == "K":
        if p < 5:
            return (t + ja) ** -1 * t ** (-(q - 1)) * ja ** (-(p - 1))
        if p == 5:
            return (t + ja) ** -1 * t ** (-(q - 1)) * ja ** -4 * math.log(1.0 + ja)
        return (t + ja) ** -1 * t ** (-(q - 1)) * ja ** -4
    raise ValueError("kind must be J or K")


ENVELOPE_REGIMES = ((2.0, 3.0, "J"), (3.0, 4.0, "J"), (2.0, 6.0, "J"), (2.0, 6.0, "K"))


def envelope_ratios(q, p, kind, ell, t_range, n, rng: np.random.Generator, spread=2.0, step=1.5):
    """Ratios J / bound (or K / bound) at n random points.

    t is log-uniform in t_range and a = +-t 10^u with u uniform in
    [-spread, spread], so both a << t and a >> t are sampled.
    """
    lo, hi = t_range
    ts = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), n)
    us = rng.uniform(-spread, spread, n)
    sg = rng.choice([-1.0, 1.0], n)
    out = []
    for t, u, s in zip(ts, us, sg):
        a = s * t * 10.0 ** u
        J, K = decay_envelopes(t, a, q, p, ell, step)
        v = J if kind == "J" else K
        out.append((float(t), float(a), v / envelope_bound(t, a, q, p, kind)))
    return out


def envelope_constant_check(q, p, kind, ell=0.5, n=100, rng=None, ranges=((1e2, 1e3), (1e4, 1e5)),
                            stability=0.2):
    """Fit the constant on the first range (max ratio) and test it on the second.

    Passes when the two maxima agree within ``stability`` and every ratio on
    the second range is below (1 + stability) times the first constant.
    """
    rng = np.random.Generator(np.random.PCG64(0)) if rng is None else rng
    A = envelope_ratios(q, p, kind, ell, ranges[0], n, rng)
    B = envelope_ratios(q, p, kind, ell, ranges[1], n, rng)
    CA = max(r for *_, r in A)
    CB = max(r for *_, r in B)
    ok = abs(CB / CA - 1.0) <= stability and all(r <= (1.0 + stability) * CA for *_, r in B)
    return {"q": q, "p": p, "kind": kind, "C_A": CA, "C_B": CB, "pass": bool(ok),
            "samples_A": A, "samples_B": B}
