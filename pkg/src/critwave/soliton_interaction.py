"""
Two-soliton interaction algebra for collinear speeds l1 < l2 along e1.

Each soliton is W_k(t, x) = eps_k lam_k^{-3/2} W_l((x - l_k t e1 - y_k)/lam_k)
with W_l(x) = W(x1/sqrt(1 - l^2), xbar).  The leading interaction of the
nonlinearity |u|^{4/3} u evaluated at W_1 + W_2 is t^-3 sum_k c_k |W_k|^{4/3};
what remains (R_Sigma) is O(t^-4) in H^1.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import integrate

from .fields_quadrature import (TWO_PI2, PowerLawFit, fit_power_law, focus_rule,
                                sinh_rule)
from .ground_state import C_TAIL, SolitonParams, kappa
from .tail_asymptotics import model_correction

NONLIN_C = 7.0 / 3.0 * C_TAIL       # (7/3) 15^{3/2}


@dataclass(frozen=True)
class TwoSolitonConfig:
    s1: SolitonParams
    s2: SolitonParams

    def __post_init__(self):
        e1 = (1.0, 0.0, 0.0, 0.0, 0.0)
        for s in (self.s1, self.s2):
            if tuple(s.direction) != e1:
                raise ValueError("speeds must be collinear along e1 (direction e1, signed ell)")
            if any(c != 0.0 for c in s.y[1:]):
                raise ValueError("centers must lie on the x1 axis")
        if not -1.0 < self.s1.ell < self.s2.ell < 1.0:
            raise ValueError("need -1 < ell1 < ell2 < 1")

    @classmethod
    def collinear(cls, ell1, ell2, lam1=1.0, lam2=1.0, eps1=1, eps2=1, y1=0.0, y2=0.0):
        if ell1 == ell2:
            raise ValueError("ell1 = ell2: the solitons do not separate")
        mk = lambda l, lam, e, y: SolitonParams(float(l), float(lam), (float(y), 0.0, 0.0, 0.0, 0.0), int(e))
        return cls(mk(ell1, lam1, eps1, y1), mk(ell2, lam2, eps2, y2))

    @property
    def ells(self):
        return self.s1.ell, self.s2.ell

    @property
    def lams(self):
        return self.s1.lam, self.s2.lam

    @property
    def epss(self):
        return self.s1.eps, self.s2.eps

    def shifted(self, dy):
        """Both centers moved by dy along e1."""
        sh = lambda s: replace(s, y=(s.y[0] + dy,) + tuple(s.y[1:]))
        return TwoSolitonConfig(sh(self.s1), sh(self.s2))

    def flipped(self):
        return TwoSolitonConfig(replace(self.s1, eps=-self.s1.eps), replace(self.s2, eps=-self.s2.eps))

    def is_dipole(self):
        return self.s1.eps == -self.s2.eps and self.s1.lam == self.s2.lam


@dataclass(frozen=True)
class InteractionCoeffs:
    sigma12: float
    sigma21: float
    c1: float
    c2: float
    a1: float
    a2: float
    Psi: float

    def as_dict(self):
        return {k: getattr(self, k) for k in ("sigma12", "sigma21", "c1", "c2", "a1", "a2", "Psi")}


def lorentz_factor(l1, l2):
    """(1 - l1^2)^{3/2} (1 - l2^2)^{3/2} / |l1 - l2|^3, invariant under boosts."""
    if l1 == l2:
        raise ValueError("equal speeds")
    return ((1 - l1 * l1) * (1 - l2 * l2)) ** 1.5 / abs(l1 - l2) ** 3


def psi_pair(lj, lk, lamj, lamk, epsj, epsk):
    return lorentz_factor(lj, lk) * lamj * lamk * (epsj * math.sqrt(lamj) + epsk * math.sqrt(lamk))


def interaction_coeffs(cfg: TwoSolitonConfig) -> InteractionCoeffs:
    (l1, l2), (m1, m2), (e1, e2) = cfg.ells, cfg.lams, cfg.epss
    d3 = abs(l1 - l2) ** 3
    s12 = (l1 - l2) / math.sqrt(1 - l2 * l2)
    s21 = (l2 - l1) / math.sqrt(1 - l1 * l1)
    c1 = NONLIN_C * e2 * m2 ** 1.5 * (1 - l2 * l2) ** 1.5 / d3
    c2 = NONLIN_C * e1 * m1 ** 1.5 * (1 - l1 * l1) ** 1.5 / d3
    a1 = -c1 * kappa(l1) * e1 / 2.0
    a2 = -c2 * kappa(l2) * e2 / 2.0
    return InteractionCoeffs(s12, s21, c1, c2, a1, a2, psi_pair(l1, l2, m1, m2, e1, e2))


def psi_multi(solitons: Sequence[SolitonParams]):
    """sum_{j != k} Psi_{j,k} over ordered pairs of collinear solitons (signed ell
    along their common direction)."""
    if len(solitons) < 2:
        raise ValueError("need at least two solitons")
    sl = [s.ell * s.direction[0] if s.direction[0] else s.ell for s in solitons]
    tot = 0.0
    for j, k in itertools.permutations(range(len(solitons)), 2):
        tot += psi_pair(sl[j], sl[k], solitons[j].lam, solitons[k].lam, solitons[j].eps, solitons[k].eps)
    return tot


# -- fields on (x1, rho) ----------------------------------------------------------

def _soliton(s: SolitonParams, t, x1, rho):
    """(W_k, d_x1 W_k, d_rho W_k) for a soliton moving along e1."""
    g2 = 1.0 / (1.0 - s.ell ** 2)
    z1 = x1 - s.ell * t - s.y[0]
    z = (g2 * z1 * z1 + rho * rho) / (s.lam * s.lam)
    amp = s.eps * s.lam ** -1.5
    q = 1.0 + z / 15.0
    Wv = amp * q ** -1.5
    c = -amp * q ** -2.5 / (5.0 * s.lam * s.lam)
    return Wv, c * g2 * z1, c * rho


def _nl(u):
    return np.abs(u) ** (4.0 / 3.0) * u


def _nl_prime(u):
    return 7.0 / 3.0 * np.abs(u) ** (4.0 / 3.0)


def R_sigma(cfg: TwoSolitonConfig, t, x1, rho, counter=True, coeffs=None):
    """(R_Sigma, d_x1 R_Sigma, d_rho R_Sigma) in closed form."""
    co = interaction_coeffs(cfg) if coeffs is None else coeffs
    W1, a1, b1 = _soliton(cfg.s1, t, x1, rho)
    W2, a2, b2 = _soliton(cfg.s2, t, x1, rho)
    S = W1 + W2
    val = _nl(S) - _nl(W1) - _nl(W2)
    d1 = _nl_prime(S) * (a1 + a2) - _nl_prime(W1) * a1 - _nl_prime(W2) * a2
    dr = _nl_prime(S) * (b1 + b2) - _nl_prime(W1) * b1 - _nl_prime(W2) * b2
    if counter:
        for c, Wk, ak, bk in ((co.c1, W1, a1, b1), (co.c2, W2, a2, b2)):
            p = np.abs(Wk) ** (4.0 / 3.0)
            dp = 4.0 / 3.0 * np.abs(Wk) ** (1.0 / 3.0) * np.sign(Wk)
            val = val - t ** -3 * c * p
            d1 = d1 - t ** -3 * c * dp * ak
            dr = dr - t ** -3 * c * dp * bk
    return val, d1, dr


def interaction_grid(cfg: TwoSolitonConfig, t, step=0.5, L=None):
    """Tensor rule (x1 split between the centers, each half refined at its
    center; rho sinh-mapped) on the box |x1|, rho < L, L = 1e4 t by default."""
    c1 = cfg.s1.ell * t + cfg.s1.y[0]
    c2 = cfg.s2.ell * t + cfg.s2.y[0]
    m = 0.5 * (c1 + c2)
    L = 1e4 * max(t, 1.0) if L is None else L
    width = min(cfg.lams)
    xa, wa = focus_rule(m - L, m, c1, step, 10, width)
    xb, wb = focus_rule(m, m + L, c2, step, 10, width)
    X = np.concatenate([xa, xb])
    WX = np.concatenate([wa, wb])
    R, WR = sinh_rule(0.0, L, step, 10, width)
    return X, WX, R, WR


def _grid_integral(dens, X, WX, R, WR):
    x1 = X[:, None]
    rho = R[None, :]
    return TWO_PI2 * float(np.sum(WX[:, None] * WR[None, :] * rho ** 3 * dens(x1, rho)))


def residual_R_sigma(cfg: TwoSolitonConfig, t, counter=True, step=0.5, L=None, check_separation=True):
    """(||R_Sigma(t)||_{L^2}, ||R_Sigma(t)||_{H^1}) with parameters frozen at
    their asymptotic values."""
    l1, l2 = cfg.ells
    if check_separation and t < 10.0 / abs(l1 - l2):
        raise ValueError(f"t = {t} too small: solitons not separated (need t >= {10.0 / abs(l2 - l1)})")
    co = interaction_coeffs(cfg)
    X, WX, R, WR = interaction_grid(cfg, t, step, L)
    x1 = X[:, None]
    rho = R[None, :]
    v, d1, dr = R_sigma(cfg, t, x1, rho, counter, co)
    w = TWO_PI2 * WX[:, None] * WR[None, :] * rho ** 3
    l2n = float(np.sum(w * v * v))
    h1 = float(np.sum(w * (d1 * d1 + dr * dr)))
    return math.sqrt(l2n), math.sqrt(l2n + h1)


def residual_slope(cfg, times, counter=True, step=0.5) -> PowerLawFit:
    return fit_power_law([(t, residual_R_sigma(cfg, t, counter, step)[0]) for t in times])


def cross_term_integral(r1, r2, t, cfg=None, step=0.5):
    """int |W_1|^{r1} |W_2|^{r2} dx at time t."""
    cfg = TwoSolitonConfig.collinear(-0.5, 0.5) if cfg is None else cfg
    X, WX, R, WR = interaction_grid(cfg, t, step)

    def dens(x1, rho):
        W1 = _soliton(cfg.s1, t, x1, rho)[0]
        W2 = _soliton(cfg.s2, t, x1, rho)[0]
        return np.abs(W1) ** r1 * np.abs(W2) ** r2
    return _grid_integral(dens, X, WX, R, WR)


def cross_term_slope(r1, r2, t_range=(20.0, 160.0), cfg=None, n=5, step=0.5) -> PowerLawFit:
    """Fitted t-exponent of int |W_1|^{r1}|W_2|^{r2} over log-spaced t."""
    if not (r1 >= r2 > 0):
        raise ValueError("need r1 >= r2 > 0")
    if not r1 + r2 > 5.0 / 3.0:
        raise ValueError("need r1 + r2 > 5/3 for integrability")
    ts = np.geomspace(t_range[0], t_range[1], n)
    return fit_power_law([(t, cross_term_integral(r1, r2, t, cfg, step)) for t in ts])


def claim_ww_exponent(r1, r2):
    """Predicted exponent: -3 r2 if r1 > 5/3, else 5 - 3(r1 + r2)."""
    return -3.0 * r2 if r1 > 5.0 / 3.0 else 5.0 - 3.0 * (r1 + r2)


# -- refined ansatz -------------------------------------------------------------------

def _v_k(s: SolitonParams, t, x, step, rel_tol):
    # lam^-3 v_l(t/lam, (x - y)/lam) with v_l replaced by its leading model
    xs = (np.asarray(x, dtype=float) - np.asarray(s.y)) / s.lam
    return s.lam ** -3 * model_correction(s.ell, t / s.lam, xs, step, rel_tol)


def assemble_ansatz(cfg: TwoSolitonConfig, t, x, c=None, step=1.5, rel_tol=1e-8,
                    with_z=True, ht=None):
    """Refined ansatz (W, X) = sum_k (W_k + c_k v_k, X_k + c_k z_k) at one point x in R^5.

    ``c`` overrides (c1, c2); c = (0, 0) gives the bare sum.  X_k = -l_k d_x1 W_k.
    z_k = lam^-4 (d_t v_l)(...) + kappa_l eps_k/(2 lam^{1/2} t^2) Lambda_k W_k, with
    d_t of the model taken by centred differences (step ``ht``).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (5,):
        raise ValueError("x must be a point of R^5")
    co = interaction_coeffs(cfg)
    cs = (co.c1, co.c2) if c is None else tuple(c)
    x1 = x[0]
    rho = float(np.linalg.norm(x[1:]))
    Wt, Xt = 0.0, 0.0
    for s, ck in zip((cfg.s1, cfg.s2), cs):
        Wk, d1, dr = _soliton(s, t, x1, rho)
        Wt += float(Wk)
        Xt += float(-s.ell * d1)
        if ck == 0:
            continue
        Wt += ck * _v_k(s, t, x, step, rel_tol)
        if with_z:
            h = 1e-3 * t if ht is None else ht
            dv = (_v_k(s, t + h, x, step, rel_tol) - _v_k(s, t - h, x, step, rel_tol)) / (2 * h)
            z1 = x1 - s.ell * t - s.y[0]
            LW = 1.5 * Wk + z1 * d1 + rho * dr
            Xt += ck * (dv + kappa(s.ell) * s.eps / (2.0 * math.sqrt(s.lam) * t * t) * LW)
    return Wt, Xt


def ansatz_envelope(cfg: TwoSolitonConfig, t, x, delta=0.5):
    """sum_k (<x - l_k t>^-3 + t^-1 <x - l_k t>^{-3+delta})."""
    x = np.asarray(x, dtype=float)
    tot = 0.0
    for s in (cfg.s1, cfg.s2):
        d = x.copy()
        d[0] -= s.ell * t
        b = math.sqrt(1.0 + float(d @ d))
        tot += b ** -3 + b ** (-3 + delta) / t
    return tot


# -- modulation ------------------------------------------------------------------------

class ModulationBlowup(RuntimeError):
    pass


def modulation_closed(lam_inf, a, t):
    s = math.sqrt(lam_inf) - a / (2.0 * np.asarray(t, dtype=float))
    if np.any(s <= 0):
        raise ModulationBlowup("lambda reaches 0 (parameters out of regime)")
    return s * s


def modulation_ode(lam_inf, a, t0, t1=math.inf, times=None, rtol=1e-13):
    """lambda(t) on [t0, t1] for lam' = a lam^{1/2} / t^2, lambda(inf) = lam_inf.

    Integrated in tau = 1/t, where the equation is d lam/d tau = -a lam^{1/2},
    starting at tau = 0.  Returns a callable of t (vectorised) or the values at
    ``times``.
    """
    if not lam_inf > 0:
        raise ValueError("lam_inf must be positive")
    if not t0 >= 1:
        raise ValueError("t0 must be >= 1")
    if a == 0:
        f = lambda t: np.full(np.shape(t), float(lam_inf))
        return f if times is None else f(np.asarray(times, dtype=float))

    def rhs(tau, y):
        return [-a * math.sqrt(max(y[0], 0.0))]

    hit = lambda tau, y: y[0]
    hit.terminal = True
    tau_hi = 1.0 / t0
    sol = integrate.solve_ivp(rhs, (0.0, tau_hi), [float(lam_inf)], method="DOP853",
                              rtol=rtol, atol=1e-15 * lam_inf, dense_output=True, events=hit)
    if sol.status == 1 or sol.y[0, -1] <= 0:
        raise ModulationBlowup("lambda reaches 0 (parameters out of regime)")

    def lam(t):
        t = np.asarray(t, dtype=float)
        if np.any(t < t0) or np.any(t > t1):
            raise ValueError("t outside [t0, t1]")
        tau = np.where(np.isinf(t), 0.0, 1.0 / np.where(np.isinf(t), 1.0, t))
        return sol.sol(tau)[0]
    return lam if times is None else lam(np.asarray(times, dtype=float))
