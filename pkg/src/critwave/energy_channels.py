"""
Exterior energy channels for radial 5D waves, and the inelasticity signature.

Radial data (U0, U1) on r > R are mapped to the half-line variables

    phi0 = r^2 U0' + 3 r U0,     Psi1(r) = r^2 U1(r) - int_r^inf s U1(s) ds,

so that Psi1' = r^2 U1' + 3 r U1.  Both vanish exactly on the non-radiating
plane span{(r^-3, 0), (0, r^-3)} and the exterior norm modulo that plane is
int_R^inf phi0^2 + Psi1^2 dr.  Writing phi = F(r - t) + G(r + t) with
F = (phi0 - Psi1)/2 and G = (phi0 + Psi1)/2, the exterior energy as
t -> +inf (resp. -inf) is carried by F (resp. G) only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fields_quadrature import (AREA_S4, TWO_PI2, PowerLawFit, RadialProfile, fit_power_law,
                                gauss_legendre, sinh_rule)
from .ground_state import SolitonParams, kappa
from .soliton_interaction import TwoSolitonConfig, interaction_coeffs
from .tail_asymptotics import MODEL_PREFACTOR, phi_sharp


# -- exterior rule ------------------------------------------------------------------------

def _as_profile(U):
    if U is None:
        return None
    if isinstance(U, RadialProfile):
        return U
    if callable(U):
        return RadialProfile.from_callable(U, np.array([0.0, 1.0]))
    raise TypeError("profiles must be RadialProfile or callables")


def _profile_fns(U):
    """(value, derivative, support end) for a profile; spline profiles are taken
    to vanish beyond their grid."""
    p = _as_profile(U)
    if p.fn is not None:
        return p.fn, (lambda r: p.derivative(r)), math.inf
    end = float(p.grid[-1])

    def val(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        m = r <= end
        out[m] = p(r[m])
        return out

    def der(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        m = r <= end
        out[m] = p.derivative(r[m])
        return out
    return val, der, end


@dataclass
class ExteriorRule:
    """Panels on [R, end) with Gauss nodes; ``edges`` are panel ends.

    ``open_tail`` marks an unbounded support: contributions beyond the last
    edge are then closed with the r^-3 law (the slowest decay of finite
    exterior energy data that does not radiate).
    """
    edges: np.ndarray
    order: int = 10
    open_tail: bool = False

    @classmethod
    def build(cls, R, end=math.inf, step=0.25, order=10, far=1e6, near=10.0, width=None):
        hi = R * far if not math.isfinite(end) else end
        if hi <= R:
            raise ValueError("empty exterior region")
        h = R / 25.0 if width is None else width
        mid = min(hi, near * R)
        lin = np.linspace(R, mid, max(2, int(math.ceil((mid - R) / h)) + 1))
        if hi > mid:
            z1 = math.log(hi / mid)
            n = max(1, int(math.ceil(z1 / step)))
            geo = mid * np.exp(np.linspace(0.0, z1, n + 1))[1:]
            lin = np.concatenate([lin, geo])
        return cls(lin, order, not math.isfinite(end))

    def nodes(self):
        gx, gw = gauss_legendre(self.order)
        a = self.edges[:-1, None]
        b = self.edges[1:, None]
        return ((a + b) / 2 + (b - a) / 2 * gx), ((b - a) / 2 * gw)

    def tail_integral(self, g, U=None):
        """int_x^inf g at every node x.  Beyond the last edge g is taken to
        vanish, or, for an open tail with g = s U(s), U ~ r^-3 is assumed."""
        X, WX = self.nodes()
        gx, gw = gauss_legendre(self.order)
        per_panel = np.sum(WX * g(X), axis=1)
        after = np.concatenate([np.cumsum(per_panel[::-1])[::-1][1:], [0.0]])
        if self.open_tail and U is not None:
            e = self.edges[-1]
            after = after + float(U(np.array([e]))[0]) * e * e
        b = self.edges[1:, None, None]
        xi = X[:, :, None]
        # int_{x_i}^{b} g on a nested Gauss rule inside each panel
        s = (xi + b) / 2 + (b - xi) / 2 * gx
        inner = np.sum((b - xi) / 2 * gw * g(s), axis=2)
        return inner + after[:, None]


def _exterior(U0, U1, R, step=0.25, far=1e6):
    # the support of the data decides the outer edge
    ends = []
    fns = []
    for U in (U0, U1):
        if U is None:
            fns.append(None)
            continue
        f = _profile_fns(U)
        fns.append(f)
        ends.append(f[2])
    end = max(ends) if ends else math.inf
    rule = ExteriorRule.build(R, end, step, far=far)
    return rule, fns


def phi_variables(U0, U1, R, step=0.25, far=1e6):
    """(nodes, weights, phi0, Psi1) on the exterior rule."""
    rule, (f0, f1) = _exterior(U0, U1, R, step, far)
    X, WX = rule.nodes()
    phi0 = np.zeros_like(X) if f0 is None else X * X * f0[1](X) + 3.0 * X * f0[0](X)
    if f1 is None:
        psi1 = np.zeros_like(X)
    else:
        psi1 = X * X * f1[0](X) - rule.tail_integral(lambda s: s * f1[0](s), f1[0])
    return X, WX, phi0, psi1


def proj_perp_norm(U0, U1, R, step=0.25, far=1e6, check=True):
    """||pi_R^perp (U0, U1)||^2 = int_R^inf (r^2 U0' + 3 r U0)^2 dr
    + int_R^inf U1^2 r^4 dr - R (int_R^inf U1 r dr)^2."""
    if not R > 0:
        raise ValueError("R must be positive")
    rule, (f0, f1) = _exterior(U0, U1, R, step, far)
    X, WX = rule.nodes()
    tot = 0.0
    if f0 is not None:
        phi0 = X * X * f0[1](X) + 3.0 * X * f0[0](X)
        tot += float(np.sum(WX * phi0 * phi0))
    if f1 is not None:
        u = f1[0](X)
        a = float(np.sum(WX * u * u * X ** 4))
        b = float(np.sum(WX * u * X))
        if rule.open_tail:
            e = rule.edges[-1]
            ue = float(f1[0](np.array([e]))[0])
            a += ue * ue * e ** 5
            b += ue * e * e
        tot += a - R * b * b
    if check and not math.isfinite(tot):
        raise ValueError("divergent exterior integral")
    return tot


def proj_identity_sides(U0, R, step=0.25, far=1e6):
    """Both sides of int_R^inf U0'^2 r^4 - 3 R^3 U0(R)^2 = int_R^inf (r^2 U0' + 3 r U0)^2."""
    rule, (f0, _) = _exterior(U0, None, R, step, far)
    X, WX = rule.nodes()
    d = f0[1](X)
    lhs = float(np.sum(WX * d * d * X ** 4)) - 3.0 * R ** 3 * float(f0[0](np.array([R]))[0]) ** 2
    phi0 = X * X * d + 3.0 * X * f0[0](X)
    return lhs, float(np.sum(WX * phi0 * phi0))


def psi_gram_projection(U1, R, step=0.25, far=1e6):
    """int_R^inf Psi1^2 dr and the L^2(r^4 dr) norm of U1 minus its projection
    on r^-3, the latter through the 1x1 Gram system."""
    rule, (_, f1) = _exterior(None, U1, R, step, far)
    X, WX = rule.nodes()
    psi1 = X * X * f1[0](X) - rule.tail_integral(lambda s: s * f1[0](s), f1[0])
    u = f1[0](X)
    k = X ** -3.0
    G = float(np.sum(WX * k * k * X ** 4))
    ip = float(np.sum(WX * u * k * X ** 4))
    e = rule.edges[-1]
    ue = float(f1[0](np.array([e]))[0]) if rule.open_tail else 0.0
    if rule.open_tail:
        G += 1.0 / e
        ip += ue * e * e
    c = ip / G
    resid = u - c * k
    rn = float(np.sum(WX * resid * resid * X ** 4))
    if rule.open_tail:
        rn += (ue * e ** 3 - c) ** 2 / e
    return float(np.sum(WX * psi1 * psi1)), float(rn)


@dataclass(frozen=True)
class ChannelReport:
    R: float
    proj_norm_sq: float
    limit_minus: float
    limit_plus: float
    ratio: float

    def as_dict(self):
        return {"R": self.R, "proj_norm_sq": self.proj_norm_sq, "limit_minus": self.limit_minus,
                "limit_plus": self.limit_plus, "ratio": self.ratio}


def channel_limits(U0, U1, R, step=0.25, far=1e6) -> ChannelReport:
    """Exact t -> -inf / +inf limits of (8 pi^2/3) int_{r > |t| + R} (U_t^2 + U_r^2) r^4 dr.

    ``ratio`` is max(limits) / ((8 pi^2/3) proj_norm_sq); the movers split
    the projected norm, so it lies in [1/2, 1].
    """
    X, WX, phi0, psi1 = phi_variables(U0, U1, R, step, far)
    F = 0.5 * (phi0 - psi1)
    G = 0.5 * (phi0 + psi1)
    plus = AREA_S4 * 2.0 * float(np.sum(WX * F * F))
    minus = AREA_S4 * 2.0 * float(np.sum(WX * G * G))
    proj = float(np.sum(WX * (phi0 * phi0 + psi1 * psi1)))
    ratio = max(plus, minus) / (AREA_S4 * proj) if proj > 0 else float("nan")
    return ChannelReport(float(R), proj, minus, plus, ratio)


def channel_inequality_check(family, R, floor=1e-14, step=0.25):
    """min over the family of max(limit_minus, limit_plus) / ((8 pi^2/3) proj).

    Members whose projected norm is (numerically) zero are rejected."""
    ratios = []
    for U0, U1 in family:
        rep = channel_limits(U0, U1, R, step)
        if not rep.proj_norm_sq > floor:
            raise ValueError("datum lies in the non-radiating plane (proj_norm_sq = 0)")
        ratios.append(rep.ratio)
    return min(ratios)


# -- randomized exterior data -------------------------------------------------------------

def random_bump(rng: np.random.Generator, R, n_terms=3):
    """Smooth data on r > R: a sum of Gaussian bumps with random centers in
    (R, 4R), widths in (R/10, R) and amplitudes of either sign."""
    c = R * rng.uniform(1.0, 4.0, n_terms)
    w = R * rng.uniform(0.1, 1.0, n_terms)
    a = rng.normal(size=n_terms) * R ** -1.5

    def U(r):
        r = np.asarray(r, dtype=float)[..., None]
        return np.sum(a * np.exp(-((r - c) / w) ** 2), axis=-1)

    def dU(r):
        r = np.asarray(r, dtype=float)[..., None]
        return np.sum(a * np.exp(-((r - c) / w) ** 2) * (-2.0 * (r - c) / w ** 2), axis=-1)
    return RadialProfile.from_callable(U, np.array([0.0, R]), dfn=dU)


def random_family(seed, n, R, n_terms=3):
    rng = np.random.Generator(np.random.PCG64(seed))
    return [(random_bump(rng, R, n_terms), random_bump(rng, R, n_terms)) for _ in range(n)]


# -- inelasticity signature ------------------------------------------------------------------

def t_of_R(R):
    return R ** (11.0 / 12.0)


class SignatureSampler:
    """phi of the averaged model tail, cached per (ell, lam, t, r); node set
    w = R/r in (0, 1) with a Gauss rule."""

    def __init__(self, rel_tol=1e-8, order=12):
        self.rel_tol = rel_tol
        self.order = order
        self._cache = {}

    def phi_l(self, ell, lam, t, r):
        # phi of lam^-3 V#(t/lam, r/lam) is lam^-2 phi_l(t/lam, r/lam)
        key = (abs(ell), lam, t, r)
        if key not in self._cache:
            self._cache[key] = lam ** -2 * phi_sharp(abs(ell), t / lam, r / lam, self.rel_tol)
        return self._cache[key]

    def phi_VL(self, cfg: TwoSolitonConfig, t, r):
        co = interaction_coeffs(cfg)
        tot = 0.0
        for s, c in ((cfg.s1, co.c1), (cfg.s2, co.c2)):
            amp = -c * MODEL_PREFACTOR * kappa(s.ell)
            tot += amp * self.phi_l(s.ell, s.lam, t, r)
        return tot

    def proj(self, cfg, R, t=None):
        """||pi_R^perp (V_L, 0)||^2 = int_R^inf phi^2 dr = R int_0^1 phi(R/w)^2 w^-2 dw."""
        t = t_of_R(R) if t is None else t
        gx, gw = gauss_legendre(self.order)
        w = 0.5 * (gx + 1.0)
        ww = 0.5 * gw
        vals = np.array([self.phi_VL(cfg, t, R / wi) for wi in w])
        return R * float(np.sum(ww * vals * vals / (w * w)))


@dataclass
class SignatureResult:
    fit: PowerLawFit
    values: list
    psi: float
    dipole: bool

    def as_dict(self):
        return {"fit": self.fit.as_dict(), "values": [list(v) for v in self.values],
                "psi": self.psi, "dipole": self.dipole}


def inelasticity_signature(cfg: TwoSolitonConfig, R_values, sampler=None, full_output=False):
    """Power-law fit in R of ||pi_R^perp (V_L(t_R), 0)||^2 with t_R = R^{11/12}.

    V_L is the sphere mean of sum_k c_k (model tail of soliton k).  Dipole
    configurations (Psi = 0) are computed anyway; their fit is then flagged
    through ``SignatureResult.dipole``.
    """
    sampler = SignatureSampler() if sampler is None else sampler
    vals = [(float(R), sampler.proj(cfg, float(R))) for R in R_values]
    psi = interaction_coeffs(cfg).Psi
    dip = cfg.is_dipole()
    try:
        fit = fit_power_law(vals)
    except ValueError:
        if not dip:
            raise
        fit = PowerLawFit(0.0, float("nan"), float("nan"), (vals[0][0], vals[-1][0]), len(vals))
    res = SignatureResult(fit, vals, psi, dip)
    return res if full_output else fit


# -- truncation of a soliton -------------------------------------------------------------------

def chi_smoothstep(s):
    """C^1 cutoff: 0 for s < 1/2, 1 for s > 1, cubic in between."""
    u = np.clip(2.0 * np.asarray(s, dtype=float) - 1.0, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def dchi_smoothstep(s):
    u = np.clip(2.0 * np.asarray(s, dtype=float) - 1.0, 0.0, 1.0)
    return 2.0 * 6.0 * u * (1.0 - u)


def _psi_exp(u):
    out = np.zeros_like(u)
    m = u > 0
    out[m] = np.exp(-1.0 / u[m])
    return out


def chi_smooth(s):
    """C^infinity cutoff built from exp(-1/u)."""
    u = 2.0 * np.asarray(s, dtype=float) - 1.0
    a = _psi_exp(u)
    return a / (a + _psi_exp(1.0 - u))


def dchi_smooth(s):
    u = 2.0 * np.asarray(s, dtype=float) - 1.0
    a = _psi_exp(u)
    b = _psi_exp(1.0 - u)
    da = np.where(u > 0, a / np.where(u > 0, u * u, 1.0), 0.0)
    db = np.where(u < 1, -b / np.where(u < 1, (1 - u) ** 2, 1.0), 0.0)
    den = (a + b) ** 2
    return 2.0 * np.where(den > 0, (da * b - a * db) / np.where(den > 0, den, 1.0), 0.0)


CUTOFFS = {"smoothstep": (chi_smoothstep, dchi_smoothstep), "smooth": (chi_smooth, dchi_smooth)}


def truncated_norm(params: SolitonParams, R, t=None, cutoff="smoothstep", step=0.5, n_theta=64):
    """||grad(W_k(t) chi_R)||_{L^2} + ||d_t W_k(t) chi_R||_{L^2} at t = t_R."""
    if tuple(params.direction) != (1.0, 0.0, 0.0, 0.0, 0.0):
        raise ValueError("truncation_scaling expects a soliton moving along e1")
    t = t_of_R(R) if t is None else t
    chi, dchi = CUTOFFS[cutoff]
    g2 = 1.0 / (1.0 - params.ell ** 2)
    lam = params.lam
    amp = params.eps * lam ** -1.5
    # polar rule about the origin on |x| > R/2, refined at R/2 and R
    r1, w1 = sinh_rule(0.0, R / 2.0, step, 10, R / 50.0)
    r2, w2 = sinh_rule(0.0, 1e6 * R, step, 10, R / 50.0)
    r = np.concatenate([R / 2.0 + r1, R + r2])
    wr = np.concatenate([w1, w2])
    gx, gw = gauss_legendre(16)
    e = np.linspace(0.0, math.pi, n_theta // 16 + 1)
    th = ((e[:-1, None] + e[1:, None]) / 2 + (e[1:, None] - e[:-1, None]) / 2 * gx).ravel()
    wt = ((e[1:, None] - e[:-1, None]) / 2 * gw).ravel() * np.sin(th) ** 3
    rr = r[:, None]
    x1 = rr * np.cos(th)[None, :]
    rho = rr * np.sin(th)[None, :]
    z1 = x1 - params.ell * t - params.y[0]
    q = 1.0 + (g2 * z1 * z1 + rho * rho) / (15.0 * lam * lam)
    Wv = amp * q ** -1.5
    c = -amp * q ** -2.5 / (5.0 * lam * lam)
    d1 = c * g2 * z1
    dr = c * rho
    ch = chi(rr / R)
    dc = dchi(rr / R) / R
    u1 = np.cos(th)[None, :]
    ur = np.sin(th)[None, :]
    g1 = d1 * ch + Wv * dc * u1
    gr = dr * ch + Wv * dc * ur
    meas = TWO_PI2 * wr[:, None] * wt[None, :] * rr ** 4
    grad = math.sqrt(float(np.sum(meas * (g1 * g1 + gr * gr))))
    dt = -params.ell * d1 * ch
    tder = math.sqrt(float(np.sum(meas * dt * dt)))
    return grad + tder


def truncation_scaling(params: SolitonParams, R_values, cutoff="smoothstep", t_fn=t_of_R) -> PowerLawFit:
    return fit_power_law([(R, truncated_norm(params, R, t_fn(R), cutoff)) for R in R_values])
