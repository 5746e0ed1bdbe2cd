"""Radially symmetric oracles on balls.

For radial u(r) on a ball in R^n the Hessian eigenvalues are u'' (once,
radial direction) and u'/r (n-1 times, tangential), so

    S_k(D^2 u) = C(n-1,k) (u'/r)^k + C(n-1,k-1) u'' (u'/r)^{k-1}
               = (C(n-1,k-1)/k) r^{1-n} d/dr [ r^{n-k} (u')^k ].

Integrating the divergence form turns the eigenproblem
S_k(D^2 u) = (r^{2s} lambda (-u))^k into a first-order integral equation

    u'(r) = [ (k/C(n-1,k-1)) r^{k-n} int_0^r t^{n-1} (t^{2s} lambda (-u))^k dt ]^{1/k}

which is marched with product-trapezoid cells that integrate the power-law
weight exactly; this absorbs the weight singularity for s < 0 since
n + 2sk > 0.  Bisection on lambda places the first zero of u at the ball
radius.  For k = 1 the substitution t = r^{1+s} turns the equation into
Bessel's equation, giving the closed form used as an independent oracle:

    lambda_1 = ((1+s) j_{nu,1})^2 / R^{2(1+s)},   nu = (n-2)/(2(1+s)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from .errors import BracketingError, NumericalError, ParameterError

_R_MIN_FACTOR = 1e-8
_DEFAULT_STEPS = 4096


def radial_sk(du, ddu, r, n: int, k: int):
    """S_k(D^2 u) for a radial function with u'(r) = du, u''(r) = ddu."""
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    du = np.asarray(du, dtype=float)
    ddu = np.asarray(ddu, dtype=float)
    r = np.asarray(r, dtype=float)
    slope = du / r
    out = math.comb(n - 1, k) * slope ** k \
        + math.comb(n - 1, k - 1) * ddu * slope ** (k - 1)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class RadialProfile:
    """Sampled radial function on [r_min, R] with u(R) = 0."""

    R: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)

    def interp(self, rq):
        return np.interp(rq, self.r, self.u)

    def interp_du(self, rq):
        return np.interp(rq, self.r, self.du)

    def check_invariants(self, tol: float = 1e-10):
        assert abs(self.u[-1]) <= tol, "u(R) must vanish"
        assert np.all(np.diff(self.r) > 0), "radii must increase"
        assert np.all(self.du >= -tol), "u' must be nonnegative"
        assert np.all(np.diff(self.u) >= -tol), "u must be non-decreasing"
        assert self.u[0] == self.u.min(), "minimum must sit at r_min"


@dataclass
class RadialEigen:
    """Eigenvalue estimate from the shooting oracle."""

    lambda1: float
    profile: RadialProfile
    bisection_width: float           # relative width of the final bracket
    evaluations: list = field(default_factory=list)
    monotone_bracket: bool = True


def first_bessel_zero(nu: float, tol: float = 1e-13) -> float:
    """First positive zero of J_nu for real order nu >= 0.

    J_nu is positive on (0, j_{nu,1}); scan outward from the order for the
    first sign change, then bisect.
    """
    if nu < 0:
        raise ParameterError("Bessel order must be nonnegative here")
    t = max(nu, 1e-3) + 0.1
    step = 0.25
    f_prev = jv(nu, t)
    for _ in range(10000):
        t_next = t + step
        f_next = jv(nu, t_next)
        if f_prev > 0 and f_next <= 0:
            return brentq(lambda x: jv(nu, x), t, t_next, xtol=tol, rtol=1e-15)
        t, f_prev = t_next, f_next
    raise NumericalError(f"no sign change found for J_{nu}")


def bessel_weighted_eigen(n: int, s: float, R: float, tol: float = 1e-12) -> float:
    """Closed-form first eigenvalue of Delta u + lambda r^{2s} u = 0 on a ball."""
    if n < 2:
        raise ParameterError("need n >= 2")
    if s <= -1:
        raise ParameterError("need s > -1")
    if R <= 0:
        raise ParameterError("need R > 0")
    nu = (n - 2) / (2.0 * (1.0 + s))
    j1 = first_bessel_zero(nu, tol=tol)
    return ((1.0 + s) * j1) ** 2 / R ** (2.0 * (1.0 + s))


def _power_cell(t0: float, t1: float, a: float, q0: float, q1: float) -> float:
    """int_{t0}^{t1} t^a q(t) dt with q linear on the cell; exact weight moments."""
    m0 = (t1 ** (a + 1) - t0 ** (a + 1)) / (a + 1)
    m1 = (t1 ** (a + 2) - t0 ** (a + 2)) / (a + 2)
    dt = t1 - t0
    w1 = (m1 - t0 * m0) / dt
    return q0 * (m0 - w1) + q1 * w1


class _Shot:
    """One outward march at fixed lambda; produces the first zero radius."""

    def __init__(self, n, k, s, R, lam, steps=_DEFAULT_STEPS, r_extend=3.0):
        self.n, self.k, self.s, self.R, self.lam = n, k, s, R, lam
        self.kappa = k / math.comb(n - 1, k - 1)
        self.a_src = n - 1 + 2.0 * s * k          # source weight exponent
        self.b_du = 1.0 + 2.0 * s                 # u' growth exponent near 0
        self.h = R / steps
        self.r_extend = r_extend * R
        self.zero_radius = math.inf
        self._march()

    def _du_from_integral(self, r, integral):
        val = self.kappa * r ** (self.k - self.n) * max(integral, 0.0)
        return val ** (1.0 / self.k)

    def _march(self):
        n, k, s, lam = self.n, self.k, self.s, self.lam
        r0 = _R_MIN_FACTOR * self.R
        rs = [r0]
        us = [-1.0]
        q0 = (lam * 1.0) ** k                     # q = (lam * (-u))^k
        integral = q0 * r0 ** (self.a_src + 1) / (self.a_src + 1)
        dus = [self._du_from_integral(r0, integral)]
        r = r0
        u = -1.0
        while r < self.r_extend:
            r_next = min(r + self.h, self.r_extend)
            # predictor: constant v = u' * r^{-b} over the cell
            v0 = dus[-1] * r ** (-self.b_du)
            u_pred = u + _power_cell(r, r_next, self.b_du, v0, v0)
            q_here = (lam * max(-u, 0.0)) ** k
            q_pred = (lam * max(-u_pred, 0.0)) ** k
            integral_pred = integral + _power_cell(r, r_next, self.a_src,
                                                   q_here, q_pred)
            du_next = self._du_from_integral(r_next, integral_pred)
            # corrector
            v1 = du_next * r_next ** (-self.b_du)
            u_next = u + _power_cell(r, r_next, self.b_du, v0, v1)
            q_next = (lam * max(-u_next, 0.0)) ** k
            integral = integral + _power_cell(r, r_next, self.a_src,
                                              q_here, q_next)
            du_next = self._du_from_integral(r_next, integral)
            rs.append(r_next)
            us.append(u_next)
            dus.append(du_next)
            if u_next >= 0.0:
                frac = -u / (u_next - u)
                self.zero_radius = r + frac * (r_next - r)
                break
            r, u = r_next, u_next
        self.r = np.array(rs)
        self.u = np.array(us)
        self.du = np.array(dus)


def shoot_eigen(n: int, k: int, s: float, R: float, tol: float = 1e-6,
                steps: int = _DEFAULT_STEPS) -> RadialEigen:
    """First eigenvalue and profile on the ball of radius R by shooting.

    Bisects lambda until the relative bracket width drops below ``tol``;
    the first-zero radius of the marched profile decreases in lambda, which
    is checked across all evaluations and reported.  The returned profile is
    rescaled so its first zero lands exactly at R, with lambda adjusted by
    the corresponding homogeneity factor.
    """
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n + 2 * s * k <= 0:
        raise ParameterError(
            f"non-integrable weight: n + 2sk = {n + 2 * s * k} must be positive")
    if s <= -1:
        raise ParameterError("need s > -1")
    if R <= 0 or tol <= 0:
        raise ParameterError("need R > 0 and tol > 0")

    guess = bessel_weighted_eigen(n, s, R)
    evaluations = []

    def zero_radius(lam):
        z = _Shot(n, k, s, R, lam, steps=steps).zero_radius
        evaluations.append((lam, z))
        return z

    lo, hi = 0.1 * guess, 10.0 * guess
    expansions = 0
    while zero_radius(lo) < R:            # zero too early: lo still too large
        lo *= 0.5
        expansions += 1
        if expansions > 20:
            raise BracketingError("no convergent lower lambda found",
                                  lambda_low=lo)
    expansions = 0
    while zero_radius(hi) > R:            # zero too late: hi still too small
        hi *= 2.0
        expansions += 1
        if expansions > 20:
            raise BracketingError("no upper lambda found below ceiling",
                                  lambda_high=hi)

    while (hi - lo) > tol * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if zero_radius(mid) > R:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)

    shot = _Shot(n, k, s, R, lam, steps=steps)
    r_star = shot.zero_radius
    if not math.isfinite(r_star):
        shot = _Shot(n, k, s, R, lo, steps=steps)
        r_star = shot.zero_radius
        lam = lo
    keep = shot.r <= r_star
    scale = R / r_star
    r_scaled = shot.r[keep] * scale
    u_scaled = shot.u[keep]
    du_scaled = shot.du[keep] / scale
    lam_final = lam * scale ** (-2.0 * (1.0 + s))
    r_scaled = np.append(r_scaled, R)
    u_scaled = np.append(u_scaled, 0.0)
    du_scaled = np.append(du_scaled, du_scaled[-1])

    zs = [z for _, z in sorted(evaluations) if math.isfinite(z)]
    monotone = all(zs[i] >= zs[i + 1] - 1e-12 * R for i in range(len(zs) - 1))

    profile = RadialProfile(R, r_scaled, u_scaled, du_scaled)
    return RadialEigen(lambda1=lam_final, profile=profile,
                       bisection_width=(hi - lo) / lam,
                       evaluations=sorted(evaluations),
                       monotone_bracket=monotone)


def radial_hessian_eigenvalues(du, ddu, r, n: int):
    """Hessian eigenvalue vector (u'', u'/r, ..., u'/r) of a radial function."""
    lam = np.empty(n)
    lam[0] = ddu
    lam[1:] = du / r
    return lam
