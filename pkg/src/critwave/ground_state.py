"""Ground state W of Delta W + W^{7/3} = 0 in R^5 and the algebra around it.

W(x) = (1 + |x|^2/15)^{-3/2}.  The linearised operator is
L = -Delta - (7/3) W^{4/3}; its kernel contains Lambda W and the d_j W, and it
has a single negative eigenvalue -lambda_0 with a radial positive
eigenfunction Y, which we compute numerically two ways.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import integrate
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .fields_quadrature import (AREA_S4, DEFAULT_SPEC, TWO_PI2, AxisymField,
                                QuadratureSpec, RadialProfile, integrate_axisym,
                                sinh_rule)

C_TAIL = 15.0 ** 1.5   # W(x) ~ C_TAIL |x|^{-3}


# ---- closed forms ---------------------------------------------------------

def W(r):
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r / 15.0) ** -1.5


def dW(r):
    """W'(r) = -(r/5)(1 + r^2/15)^{-5/2}."""
    r = np.asarray(r, dtype=float)
    return -(r / 5.0) * (1.0 + r * r / 15.0) ** -2.5


def d2W(r):
    r = np.asarray(r, dtype=float)
    q = 1.0 + r * r / 15.0
    return -0.2 * q ** -2.5 + (r * r / 15.0) * q ** -3.5


def lapW(r):
    # W'' + 4W'/r, which simplifies to -(1 + r^2/15)^{-7/2}
    r = np.asarray(r, dtype=float)
    return -(1.0 + r * r / 15.0) ** -3.5


def LambdaW(r):
    r = np.asarray(r, dtype=float)
    return 1.5 * W(r) + r * dW(r)


def dLambdaW(r):
    r = np.asarray(r, dtype=float)
    return 2.5 * dW(r) + r * d2W(r)


def potential(r):
    """(7/3) W^{4/3} = (7/3)(1 + r^2/15)^{-2}."""
    r = np.asarray(r, dtype=float)
    return (7.0 / 3.0) * (1.0 + r * r / 15.0) ** -2.0


def ground_residual(r):
    """Delta W + W^{7/3} from the closed-form derivatives."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r == 0, 1.0, r)
    lap = np.where(r == 0, 5.0 * d2W(r), d2W(r) + 4.0 * dW(r) / safe)
    return lap + W(r) ** (7.0 / 3.0)


def W_field():
    return AxisymField.from_radial(W, dW, name="W", lapU=lapW)


def lapLambdaW(r):
    """Delta(Lambda W) = (7/30)(r^2 - 15)(1 + r^2/15)^{-9/2}, by hand."""
    r = np.asarray(r, dtype=float)
    return (7.0 / 30.0) * (r * r - 15.0) * (1.0 + r * r / 15.0) ** -4.5


def LambdaW_field():
    return AxisymField.from_radial(LambdaW, dLambdaW, name="LambdaW", lapU=lapLambdaW)


def dW_dx1_field():
    q = lambda x1, rho: 1.0 + (x1 * x1 + rho * rho) / 15.0
    fn = lambda x1, rho: -(x1 / 5.0) * q(x1, rho) ** -2.5
    d1 = lambda x1, rho: -0.2 * q(x1, rho) ** -2.5 + (x1 * x1 / 15.0) * q(x1, rho) ** -3.5
    dr = lambda x1, rho: (x1 * rho / 15.0) * q(x1, rho) ** -3.5
    return AxisymField(fn, d1, dr, name="d1W")


def boosted_W_field(ell, t=0.0, lam=1.0, eps=1.0, center=0.0):
    """eps * lam^{-3/2} W((x1 - ell t - center)/(lam sqrt(1-ell^2)), xbar/lam)."""
    if not abs(ell) < 1:
        raise ValueError("|ell| must be < 1")
    gam = 1.0 / math.sqrt(1.0 - ell * ell)
    c = ell * t + center
    amp = eps * lam ** -1.5

    def z(x1, rho):
        return ((x1 - c) * gam / lam) ** 2 + (rho / lam) ** 2

    fn = lambda x1, rho: amp * (1.0 + z(x1, rho) / 15.0) ** -1.5
    d1 = lambda x1, rho: -amp * ((x1 - c) * gam * gam / (5.0 * lam * lam)) * (1.0 + z(x1, rho) / 15.0) ** -2.5
    dr = lambda x1, rho: -amp * (rho / (5.0 * lam * lam)) * (1.0 + z(x1, rho) / 15.0) ** -2.5
    return AxisymField(fn, d1, dr, centers=(c,), name="W_ell")


def eval_ground_state(which, point, ell=0.0, j=1):
    """Closed-form W, Lambda W, d_j W or the boost W_ell at points of R^5.

    ``point`` has shape (..., 5).  W_boosted uses W(x1/sqrt(1-ell^2), xbar).
    """
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != 5:
        raise ValueError("points must have 5 coordinates")
    r = np.linalg.norm(x, axis=-1)
    if which == "W":
        return W(r)
    if which == "LambdaW":
        return LambdaW(r)
    if which == "gradW_j":
        if not 1 <= j <= 5:
            raise ValueError("j must be in 1..5")
        return -(x[..., j - 1] / 5.0) * (1.0 + r * r / 15.0) ** -2.5
    if which == "W_boosted":
        if not abs(ell) < 1:
            raise ValueError("|ell| must be < 1")
        y = x.copy()
        y[..., 0] = y[..., 0] / math.sqrt(1.0 - ell * ell)
        return W(np.linalg.norm(y, axis=-1))
    raise ValueError(f"unknown ground-state quantity {which!r}")


# ---- parameters -----------------------------------------------------------

@dataclass(frozen=True)
class SolitonParams:
    ell: float
    lam: float = 1.0
    y: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    eps: int = 1
    direction: tuple = (1.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not abs(self.ell) < 1:
            raise ValueError("|ell| must be < 1")
        if not self.lam > 0:
            raise ValueError("scale lambda must be positive")
        if self.eps not in (1, -1):
            raise ValueError("epsilon must be +1 or -1")
        if len(self.y) != 5 or len(self.direction) != 5:
            raise ValueError("y and direction must be vectors in R^5")
        n = math.sqrt(sum(d * d for d in self.direction))
        if abs(n - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")

    @classmethod
    def from_velocity(cls, velocity, lam=1.0, y=(0.0,) * 5, eps=1):
        v = np.asarray(velocity, dtype=float)
        s = float(np.linalg.norm(v))
        d = tuple(v / s) if s > 0 else (1.0, 0.0, 0.0, 0.0, 0.0)
        return cls(s, lam, tuple(float(c) for c in y), eps, d)

    @property
    def velocity(self):
        return self.ell * np.asarray(self.direction)

    def frame(self):
        """Orthogonal matrix Q with Q @ direction = e1 (Householder)."""
        d = np.asarray(self.direction, dtype=float)
        e1 = np.eye(5)[0]
        v = d - e1
        if np.linalg.norm(v) < 1e-15:
            return np.eye(5)
        v /= np.linalg.norm(v)
        return np.eye(5) - 2.0 * np.outer(v, v)

    def evaluate(self, t, x):
        """eps lam^{-3/2} W_ell((x - ell t dir - y)/lam) at points x (..., 5)."""
        x = np.asarray(x, dtype=float) - np.asarray(self.y) - t * self.velocity
        z = (x @ self.frame().T) / self.lam
        return self.eps * self.lam ** -1.5 * eval_ground_state("W_boosted", z, self.ell)


def lorentz_compose(ell, beta):
    if not (abs(ell) < 1 and abs(beta) < 1):
        raise ValueError("speeds must lie in (-1, 1)")
    return (ell + beta) / (1.0 + ell * beta)


# ---- radial integrals -----------------------------------------------------

def radial_integral(g, lo=0.0, hi=math.inf, rel=1e-13):
    """(8 pi^2 / 3) int_lo^hi g(r) r^4 dr by adaptive quadrature."""
    f = lambda r: g(r) * r ** 4
    pts = [p for p in (1.0, 10.0, 100.0) if lo < p < hi]
    edges = [lo] + pts + [hi]
    tot = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, limit=400, epsabs=0.0, epsrel=rel)
        tot += v
        err += e
    return AREA_S4 * tot, AREA_S4 * err


@lru_cache(maxsize=None)
def _ground_integrals():
    out = {}
    out["grad_sq"] = radial_integral(lambda r: dW(r) ** 2)
    out["W10_3"] = radial_integral(lambda r: W(r) ** (10.0 / 3.0))
    out["W7_3"] = radial_integral(lambda r: W(r) ** (7.0 / 3.0))
    out["W43_LW"] = radial_integral(lambda r: W(r) ** (4.0 / 3.0) * LambdaW(r))
    out["LW_sq"] = radial_integral(lambda r: LambdaW(r) ** 2)
    return out


def kappa(ell=0.0):
    """kappa_ell = -(1 - ell^2)(W^{4/3}, Lambda W)/||Lambda W||^2."""
    if not abs(ell) < 1:
        raise ValueError("|ell| must be < 1")
    g = _ground_integrals()
    k0 = -g["W43_LW"][0] / g["LW_sq"][0]
    return (1.0 - ell * ell) * k0


def energy_W():
    """E(W, 0) = (1/5) int |grad W|^2, with a quadrature error bar."""
    v, e = _ground_integrals()["grad_sq"]
    return v / 5.0, e / 5.0


# ---- operator L -------------------------------------------------------------

def apply_L(v: AxisymField) -> AxisymField:
    """-Delta v - (7/3) W^{4/3} v as a new field (pointwise evaluation)."""
    fn = lambda x1, rho: -v.laplacian(x1, rho) - potential(np.hypot(x1, rho)) * v(x1, rho)
    return AxisymField(fn, support_hint=v.support_hint, centers=v.centers, name="L" + v.name)


# ---- eigenpair ------------------------------------------------------------

class EigenpairMismatch(RuntimeError):
    def __init__(self, shoot, matrix):
        super().__init__(f"shooting {shoot!r} vs matrix {matrix!r} disagree")
        self.shoot = shoot
        self.matrix = matrix


def _fd_lambda(n, Rmax=60.0):
    # y = r^2 Y solves -y'' + 2y/r^2 - V y = -lambda y, y(0) = y(Rmax) = 0
    h = Rmax / (n + 1)
    r = h * np.arange(1, n + 1)
    d = 2.0 / h ** 2 + 2.0 / r ** 2 - potential(r)
    e = np.full(n - 1, -1.0 / h ** 2)
    w = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0))
    return -float(w[0])


def eigen_matrix(n=4000, Rmax=60.0):
    """lambda_0 from the tridiagonal eigensolve, Richardson-extrapolated
    from n and n/2 interior nodes (second-order scheme)."""
    a = _fd_lambda(n, Rmax)
    b = _fd_lambda(n // 2, Rmax)
    hr = ((Rmax / (n + 1)) / (Rmax / (n // 2 + 1))) ** 2
    return (a - hr * b) / (1.0 - hr)


def _rhs(lam):
    def f(r, u):
        return [u[1], -4.0 * u[1] / r - potential(r) * u[0] + lam * u[0]]
    return f


def _shoot(lam, r0, rm, Rmax, rtol=1e-12, t_eval_out=None, t_eval_in=None):
    c = ((7.0 / 3.0) - lam) / 10.0
    y0 = [1.0 - c * r0 * r0, -2.0 * c * r0]
    out = solve_ivp(_rhs(lam), (r0, rm), y0, method="DOP853", rtol=rtol, atol=1e-30,
                    t_eval=t_eval_out)
    k = math.sqrt(lam)
    # r^{-2} e^{-k r}(1 + 1/(k r)) solves the free equation exactly
    g = lambda r: r ** -2 * math.exp(-k * (r - Rmax)) * (1.0 + 1.0 / (k * r))
    dg = lambda r: g(r) * (-2.0 / r - k) + r ** -2 * math.exp(-k * (r - Rmax)) * (-1.0 / (k * r * r))
    inn = solve_ivp(_rhs(lam), (Rmax, rm), [g(Rmax), dg(Rmax)], method="DOP853", rtol=rtol,
                    atol=1e-30, t_eval=t_eval_in)
    return out, inn


def _mismatch(lam, r0=1e-3, rm=8.0, Rmax=60.0):
    out, inn = _shoot(lam, r0, rm, Rmax)
    yo, po = out.y[0, -1], out.y[1, -1]
    yi, pi = inn.y[0, -1], inn.y[1, -1]
    return (po * yi - yo * pi) / math.hypot(yo, po) / math.hypot(yi, pi)


def eigen_shooting(guess, r0=1e-3, rm=8.0, Rmax=60.0, xtol=1e-14):
    lo, hi = 0.9 * guess, 1.1 * guess
    flo, fhi = _mismatch(lo, r0, rm, Rmax), _mismatch(hi, r0, rm, Rmax)
    for _ in range(20):
        if flo * fhi < 0:
            break
        lo, hi = 0.8 * lo, min(2.3, 1.2 * hi)
        flo, fhi = _mismatch(lo, r0, rm, Rmax), _mismatch(hi, r0, rm, Rmax)
    else:
        raise RuntimeError("could not bracket the negative eigenvalue")
    return brentq(_mismatch, lo, hi, args=(r0, rm, Rmax), xtol=xtol, rtol=1e-15, maxiter=200)


@dataclass
class GroundStateData:
    lambda0: float
    Y: RadialProfile
    kappa0: float
    E_W: float
    lambda0_shooting: float = float("nan")
    lambda0_matrix: float = float("nan")
    residual: float = float("nan")
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.kappa0 > 0):
            raise ValueError("lambda0 and kappa0 must be positive")


def _Y_profile(lam, r0=1e-3, rm=8.0, Rmax=60.0, n=4001):
    grid = np.linspace(0.0, Rmax, n)
    grid[1] = max(grid[1], r0)
    go = grid[(grid >= r0) & (grid <= rm)]
    gi = grid[grid > rm][::-1]
    out, inn = _shoot(lam, r0, rm, Rmax, t_eval_out=np.concatenate([go, [rm]]),
                      t_eval_in=np.concatenate([gi, [rm]]))
    yo = out.y[0][:-1]
    yi = inn.y[0][:-1][::-1]
    scale = out.y[0][-1] / inn.y[0][-1]
    # value at 0 is 1 from the Taylor start
    vals = np.concatenate([[1.0], yo, scale * yi])
    prof = RadialProfile(grid, vals, order=5)
    norm = math.sqrt(AREA_S4 * prof.integrate(lambda r: prof(r) ** 2 * r ** 4))
    return prof.with_values(vals / norm)


def eigen_residual(Y: RadialProfile, lam):
    """|| L Y + lam Y ||_{L^2} over the profile's grid."""
    def res2(r):
        d1 = Y.derivative(r, 1)
        d2 = Y.derivative(r, 2)
        safe = np.where(r < 1e-9, 1.0, r)
        lap = np.where(r < 1e-9, 5.0 * d2, d2 + 4.0 * d1 / safe)
        return (-lap - potential(r) * Y(r) + lam * Y(r)) ** 2 * r ** 4
    return math.sqrt(AREA_S4 * Y.integrate(res2))


def ground_eigenpair(spec: QuadratureSpec = DEFAULT_SPEC, tol=1e-6):
    """(lambda0, Y) with L Y = -lambda0 Y, cross-checked by two methods."""
    lm = eigen_matrix()
    ls = eigen_shooting(lm)
    if abs(ls - lm) > tol * abs(ls):
        raise EigenpairMismatch(ls, lm)
    Y = _Y_profile(ls)
    return ls, Y, lm


@lru_cache(maxsize=None)
def ground_state_data() -> GroundStateData:
    ls, Y, lm = ground_eigenpair()
    res = eigen_residual(Y, ls)
    E, _ = energy_W()
    return GroundStateData(ls, Y, kappa(0.0), E, ls, lm, res)


def Y_field():
    Y = ground_state_data().Y
    Rm = Y.grid[-1]

    def U(r):
        return np.where(r > Rm, 0.0, Y(np.minimum(r, Rm)))

    def dU(r):
        return np.where(r > Rm, 0.0, Y.derivative(np.minimum(r, Rm)))

    def lapU(r):
        rr = np.minimum(r, Rm)
        safe = np.where(rr < 1e-9, 1.0, rr)
        d2 = Y.derivative(rr, 2)
        v = np.where(rr < 1e-9, 5.0 * d2, d2 + 4.0 * Y.derivative(rr) / safe)
        return np.where(r > Rm, 0.0, v)

    return AxisymField.from_radial(U, dU, name="Y", support_hint=Rm, lapU=lapU)


# ---- energy ---------------------------------------------------------------

def energy_momentum(u: AxisymField, v: AxisymField, spec: QuadratureSpec = DEFAULT_SPEC,
                    method="mapped"):
    """E(u,v) = 1/2 int v^2 + 1/2 int |grad u|^2 - 3/10 int |u|^{10/3} and
    M = int v grad u.  For axisymmetric data only M_1 can be nonzero; the
    transverse components vanish by symmetry and are returned as zeros."""
    dens = lambda a, b: (0.5 * v(a, b) ** 2 + 0.5 * u.grad_sq(a, b)
                         - 0.3 * np.abs(u(a, b)) ** (10.0 / 3.0))
    centers = tuple(u.centers) + tuple(v.centers)
    E = integrate_axisym(AxisymField(dens, centers=centers), spec, method=method)
    M1 = integrate_axisym(AxisymField(lambda a, b: v(a, b) * u.d_x1(a, b), centers=centers),
                          spec, method=method)
    return E, np.array([M1, 0.0, 0.0, 0.0, 0.0])


# ---- coercivity -----------------------------------------------------------

def coercivity_form(v: AxisymField, form="plain", gamma=None,
                    spec: QuadratureSpec = DEFAULT_SPEC, method="mapped"):
    """(Lv, v) (or the phi_gamma weighted variant) and the projections.

    Returns (value, dict) where dict holds <v,Lambda W>_H1, <v,d1W>_H1,
    <v,W>_H1, <v,Y>_L2 and ||v||^2_H1 so callers can probe the coercivity
    constant.  H1 pairings use <v,g>_H1 = -int v Delta g with the closed
    Laplacians of the directions.
    """
    if form not in ("plain", "with_Y", "weighted"):
        raise ValueError("form must be plain, with_Y or weighted")
    g = spec.gamma if gamma is None else gamma
    if form == "weighted":
        dens = lambda a, b: (v.grad_sq(a, b) * (1 + a * a + b * b) ** (-2 * g)
                             - potential(np.hypot(a, b)) * v(a, b) ** 2)
    else:
        dens = lambda a, b: v.grad_sq(a, b) - potential(np.hypot(a, b)) * v(a, b) ** 2
    I = lambda fn: integrate_axisym(AxisymField(fn, centers=v.centers), spec, method=method)
    val = I(dens)
    r = lambda a, b: np.hypot(a, b)
    # -Delta(Lambda W) = V Lambda W, -Delta(d1 W) = V d1 W, -Delta W = W^{7/3}
    d1W = dW_dx1_field()
    Yf = Y_field()
    proj = {
        "LambdaW_H1": I(lambda a, b: v(a, b) * potential(r(a, b)) * LambdaW(r(a, b))),
        "d1W_H1": I(lambda a, b: v(a, b) * potential(r(a, b)) * d1W(a, b)),
        "W_H1": I(lambda a, b: v(a, b) * W(r(a, b)) ** (7.0 / 3.0)),
        "Y_L2": I(lambda a, b: v(a, b) * Yf(a, b)),
        "H1_sq": I(lambda a, b: v.grad_sq(a, b)),
    }
    return val, proj


# ---- inversion of L -------------------------------------------------------

class OrthogonalityError(ValueError):
    def __init__(self, msg, products):
        super().__init__(msg)
        self.products = products


def _fv_radial(r):
    """Finite-volume pieces of the 5D radial Laplacian on nodes r (r[0] = 0)."""
    mid = 0.5 * (r[1:] + r[:-1])
    edges = np.concatenate([[0.0], mid, [r[-1]]])
    vol = (edges[1:] ** 5 - edges[:-1] ** 5) / 5.0
    flux = mid ** 4 / np.diff(r)
    return vol, flux


def radial_laplacian_matrix(r):
    """Sparse (vol-weighted) Laplacian S with (Delta V)_i = (S V)_i / vol_i,
    Dirichlet at the last node (rows exclude it)."""
    vol, flux = _fv_radial(r)
    n = r.size - 1   # unknowns 0..n-1, V[n] = 0
    main = np.zeros(n)
    main[:] -= flux[:n]
    main[1:] -= flux[:n - 1]
    off = flux[:n - 1]
    S = sp.diags([off, main, off], [-1, 0, 1], format="csc")
    return S, vol[:n]


def radial_grid(Rmax=1e4, n=3000, scale=1.0):
    z = np.linspace(0.0, math.asinh(Rmax / scale), n + 1)
    return scale * np.sinh(z)


class InvertedField(AxisymField):
    pass


def _check_orthogonality(F, radial, spec, tol):
    if radial:
        Fr = lambda r: F(r, 0.0 * r)
        p_lw, _ = radial_integral(lambda r: Fr(r) * LambdaW(r))
        nF = math.sqrt(radial_integral(lambda r: Fr(r) ** 2)[0])
        nL = math.sqrt(_ground_integrals()["LW_sq"][0])
        prods = {"LambdaW": p_lw, "d1W": 0.0}
        scale = {"LambdaW": nF * nL, "d1W": 1.0}
    else:
        I = lambda fn: integrate_axisym(AxisymField(fn, centers=F.centers), spec, method="mapped")
        r = lambda a, b: np.hypot(a, b)
        d1W = dW_dx1_field()
        prods = {"LambdaW": I(lambda a, b: F(a, b) * LambdaW(r(a, b))),
                 "d1W": I(lambda a, b: F(a, b) * d1W(a, b))}
        nF = math.sqrt(abs(I(lambda a, b: F(a, b) ** 2)))
        scale = {"LambdaW": nF * math.sqrt(_ground_integrals()["LW_sq"][0]),
                 "d1W": nF * math.sqrt(_ground_integrals()["grad_sq"][0] / 5.0)}
    for k in prods:
        if scale[k] > 0 and abs(prods[k]) > tol * scale[k]:
            raise OrthogonalityError(f"F is not orthogonal to {k}: {prods[k]:.3e}", prods)
    return prods


def invert_L(F, spec: QuadratureSpec = DEFAULT_SPEC, radial=None, Rmax=None, n=None,
             check=True, tol=1e-8):
    """Solve L V = F with <V, Lambda W>_H1 = <V, grad W>_H1 = 0.

    The equation is posed as M V = -Delta^{-1} F with
    M V = V + Delta^{-1}((7/3) W^{4/3} V); after multiplying through by the
    discrete Laplacian this is the sparse system -(Delta_h + V_pot) V = F,
    which we border with the H1 constraints (one Lagrange multiplier per
    kernel direction).  Radial F uses a 1D finite-volume grid, otherwise an
    axisymmetric (x1, rho) grid.  Far field: Dirichlet at Rmax.
    """
    if isinstance(F, RadialProfile):
        prof = F
        F = AxisymField.from_radial(prof.__call__, name="F")
        radial = True
    if not isinstance(F, AxisymField):
        F = AxisymField(F)
    if radial is None:
        radial = False
    if check:
        prods = _check_orthogonality(F, radial, spec, tol)
    else:
        prods = {}
    if radial:
        return _invert_radial(F, Rmax or spec.truncation_radius, n or 3000, prods)
    return _invert_axisym(F, Rmax or 2000.0, n or 100, prods)


def _solve_radial(F, r):
    S, vol = radial_laplacian_matrix(r)
    rr = r[:-1]
    # rows divided by the cell volumes: the raw finite-volume rows span
    # twenty orders of magnitude and spoil the pivoting near r = 0
    A = (sp.diags(1.0 / vol) @ (-S) - sp.diags(potential(rr))).tocsc()
    c = vol * potential(rr) * LambdaW(rr)        # <V, Lambda W>_H1 row
    c /= np.linalg.norm(c)
    K = sp.bmat([[A, sp.csc_matrix(LambdaW(rr)[:, None])], [sp.csc_matrix(c[None, :]), None]],
                format="csc")
    sol = splu(K).solve(np.concatenate([F(rr, 0.0 * rr), [0.0]]))
    return np.concatenate([sol[:-1], [0.0]]), sol[-1:]


def _invert_radial(F, Rmax, n, prods, richardson=True):
    # the sinh grid with 2n cells contains the n-cell grid, so the two
    # second-order solutions combine node by node
    r = radial_grid(Rmax, n)
    V, mult = _solve_radial(F, r)
    if richardson:
        V2, mult2 = _solve_radial(F, radial_grid(Rmax, 2 * n))
        V = (4.0 * V2[::2] - V) / 3.0
        mult = (4.0 * mult2 - mult) / 3.0
    sol = np.concatenate([V[:-1], mult])
    prof = RadialProfile(r, V, order=3)
    res = InvertedField(lambda x1, rho: prof(np.minimum(np.hypot(x1, rho), Rmax)) * (np.hypot(x1, rho) <= Rmax),
                        lambda x1, rho: _rad_partial(prof, x1, rho, Rmax, 0),
                        lambda x1, rho: _rad_partial(prof, x1, rho, Rmax, 1),
                        support_hint=Rmax, name="V")
    res.profile = prof
    res.multipliers = sol[-1:]
    res.products = prods
    res.grid = r
    return res


def _rad_partial(prof, x1, rho, Rmax, which):
    r = np.hypot(x1, rho)
    rr = np.minimum(r, Rmax)
    safe = np.where(rr == 0, 1.0, rr)
    d = prof.derivative(rr) * (x1 if which == 0 else rho) / safe
    return np.where((r == 0) | (r > Rmax), 0.0, d)


def axisym_fd_grid(Rmax=200.0, n=160, scale=1.0):
    zx = np.linspace(-math.asinh(Rmax / scale), math.asinh(Rmax / scale), 2 * n + 1)
    x = scale * np.sinh(zx)
    zr = np.linspace(0.0, math.asinh(Rmax / scale), n + 1)
    rho = scale * np.sinh(zr)
    return x, rho


def axisym_laplacian_matrix(x, rho):
    """Finite-volume Laplacian on the tensor grid, Dirichlet on the outer
    boundary (x ends and rho end), symmetric about the axis.
    Returns (S, vol, shape) with (Delta V) = S V / vol on interior nodes."""
    nx, nr = x.size - 2, rho.size - 1
    # x direction, interior nodes 1..nx
    xm = 0.5 * (x[1:] + x[:-1])
    cx = np.diff(xm)                       # cell widths for interior nodes
    fx = 1.0 / np.diff(x)                  # face conductances
    Dx = sp.diags([fx[1:nx], -(fx[:nx] + fx[1:nx + 1]), fx[1:nx]], [-1, 0, 1])
    # rho direction, nodes 0..nr-1 with the 5D cylindrical weight rho^3
    rm = 0.5 * (rho[1:] + rho[:-1])
    redges = np.concatenate([[0.0], rm])
    vr = (np.concatenate([rm, [rho[-1]]]) ** 4 - redges ** 4)[:nr] / 4.0
    fr = rm ** 3 / np.diff(rho)
    main = np.zeros(nr)
    main -= fr[:nr]
    main[1:] -= fr[:nr - 1]
    Dr = sp.diags([fr[:nr - 1], main, fr[:nr - 1]], [-1, 0, 1])
    S = sp.kron(Dx, sp.diags(vr)) + sp.kron(sp.diags(cx), Dr)
    vol = np.kron(cx, vr)
    return S.tocsc(), vol, (nx, nr)


def _axisym_system(x, rho):
    S, vol, (nx, nr) = axisym_laplacian_matrix(x, rho)
    X = np.repeat(x[1:-1], nr)
    P = np.tile(rho[:-1], nx)
    R = np.hypot(X, P)
    pot = potential(R)
    A = (sp.diags(1.0 / vol) @ (-S) - sp.diags(pot)).tocsc()
    d1 = dW_dx1_field()(X, P)
    C = np.vstack([vol * pot * LambdaW(R), vol * pot * d1]).T
    C /= np.linalg.norm(C, axis=0)
    B = np.vstack([LambdaW(R), d1]).T
    K = sp.bmat([[A, sp.csc_matrix(B)], [sp.csc_matrix(C.T), None]], format="csc")
    return K, A, C, vol, X, P, (nx, nr)


def _invert_axisym(F, Rmax, n, prods, richardson=True):
    x, rho = axisym_fd_grid(Rmax, n)
    K, A, C, vol, X, P, (nx, nr) = _axisym_system(x, rho)
    sol = splu(K).solve(np.concatenate([F(X, P), [0.0, 0.0]]))
    V = sol[:-2].reshape(nx, nr)
    if richardson:
        x2, rho2 = axisym_fd_grid(Rmax, 2 * n)
        K2, _, _, vol2, X2, P2, (nx2, nr2) = _axisym_system(x2, rho2)
        sol2 = splu(K2).solve(np.concatenate([F(X2, P2), [0.0, 0.0]]))
        V2 = sol2[:-2].reshape(nx2, nr2)
        V = (4.0 * V2[1::2, ::2] - V) / 3.0
        sol = np.concatenate([V.ravel(), (4.0 * sol2[-2:] - sol[-2:]) / 3.0])
    from scipy.interpolate import RegularGridInterpolator
    full = np.zeros((x.size, rho.size))
    full[1:-1, :-1] = V
    interp = RegularGridInterpolator((x, rho), full, method="cubic", bounds_error=False, fill_value=0.0)
    res = InvertedField(lambda a, b: interp(np.stack(np.broadcast_arrays(a, np.abs(b)), axis=-1)),
                        support_hint=Rmax, centers=(0.0,), name="V")
    res.nodes = (X, P)
    res.values = sol[:-2]
    res.multipliers = sol[-2:]
    res.products = prods
    res.matrix = A
    res.constraints = C
    res.volumes = vol
    res.grid = (x, rho)
    return res


def apply_M_radial(V_vals, r):
    """M V = V + Delta_h^{-1}((7/3) W^{4/3} V) on the radial grid (Dirichlet)."""
    S, vol = radial_laplacian_matrix(r)
    rr = r[:-1]
    w = splu(S.tocsc()).solve(vol * potential(rr) * V_vals[:-1])
    return np.concatenate([V_vals[:-1] + w, [0.0]])
