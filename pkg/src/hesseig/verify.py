"""Numerical verification harness: weighted derivative sup-norms, fundamental
solutions, Wolff potentials, Holder probes, scaling/domain checks, and the
linearized eigenproblem with frozen Hessian coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import simpson

from . import dirichlet, grids, radial, symfun
from .errors import ConeError, NumericalError, ParameterError
from .grids import GridField
from .problem import ProblemSpec
from .radial import RadialProfile


@dataclass
class EstimateReport:
    """Weighted and unweighted derivative sup-norms of a field.

    K = sup |x| |Du|, L_beta = sup |x|^{2 beta} |D^2 u| (spectral norm),
    K_hat = sup |Du|, L_hat = sup |D^2 u|.  The sups exclude a 2h collar at
    the boundary, and at the origin as well when s < 0 (there only the
    weighted quantities are meaningful).
    """

    K: float
    L_beta: float
    beta: float
    K_hat: float
    L_hat: float
    evaluated_on: str
    delta: float


def estimate_norms(u: GridField, spec: ProblemSpec, beta: float = 1.5) -> EstimateReport:
    if beta <= 1.0:
        raise ParameterError("beta must exceed 1")
    geo = grids.geometry(spec.domain, spec.h)
    ux, uy = grids.gradient_centered(u.values, u.h)
    uxx, uxy, uyy = grids.hessian_centered(u.values, u.h)
    grad_norm = np.sqrt(ux ** 2 + uy ** 2)
    lo, hi = grids.hessian_eigenvalues_2x2(uxx, uxy, uyy)
    hess_norm = np.maximum(np.abs(lo), np.abs(hi))
    r = np.sqrt(geo.R2)
    mask = geo.inside & (geo.boundary_distance >= 2.0 * spec.h)
    if spec.s < 0:
        mask &= r >= 2.0 * spec.h
    if not mask.any():
        raise ParameterError("evaluation mask is empty; grid too coarse")
    return EstimateReport(
        K=float(np.max((r * grad_norm)[mask])),
        L_beta=float(np.max((r ** (2.0 * beta) * hess_norm)[mask])),
        beta=beta,
        K_hat=float(np.max(grad_norm[mask])),
        L_hat=float(np.max(hess_norm[mask])),
        evaluated_on=f"grid h={spec.h:g} on {spec.domain}",
        delta=spec.delta,
    )


# ---- fundamental solutions ----------------------------------------------

def fundamental_solution(x_norm: float, n: int, k: int) -> float:
    """Radial profile of the k-Hessian fundamental solution.

    |x|^{2-n/k} for k > n/2, log |x| for k = n/2, -|x|^{2-n/k} for k < n/2.
    At the origin the k <= n/2 branches are -infinity.
    """
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    if x_norm < 0:
        raise ParameterError("x_norm must be nonnegative")
    a = 2.0 - n / k
    if 2 * k > n:
        return x_norm ** a
    if x_norm == 0.0:
        return -math.inf
    if 2 * k == n:
        return math.log(x_norm)
    return -(x_norm ** a)


def _fundamental_derivatives(r: np.ndarray, n: int, k: int):
    a = 2.0 - n / k
    if 2 * k == n:
        return 1.0 / r, -1.0 / r ** 2
    sign = 1.0 if 2 * k > n else -1.0
    return sign * a * r ** (a - 1.0), sign * a * (a - 1.0) * r ** (a - 2.0)


def fundamental_residual(n: int, k: int, radii) -> float:
    """max_r |S_k(D^2 w_k)(r)| over sample radii; zero off the origin exactly."""
    r = np.asarray(radii, dtype=float)
    if np.any(r <= 0):
        raise ParameterError("radii must be bounded away from zero")
    du, ddu = _fundamental_derivatives(r, n, k)
    vals = radial.radial_sk(du, ddu, r, n, k)
    return float(np.max(np.abs(np.atleast_1d(vals))))


# ---- Wolff potential -----------------------------------------------------

def wolff_potential(mu_of_ball, n: int, k: int, r: float,
                    points: int = 4001, t_min_factor: float = 1e-8) -> float:
    """W_k^mu(0, r) = int_0^r (mu(B_t) / t^{n-2k})^{1/k} dt/t.

    Simpson quadrature on a log-spaced grid; the integrand must decay toward
    t = 0 (checked on the smallest grid points), otherwise the potential is
    divergent and +infinity is returned as the divergence marker.
    """
    if not n / 2 < k < n:
        raise ParameterError(f"need n/2 < k < n, got k={k}, n={n}")
    if r <= 0:
        raise ParameterError("r must be positive")
    tau = np.linspace(math.log(t_min_factor * r), math.log(r), points)
    t = np.exp(tau)
    mu = np.asarray(mu_of_ball(t), dtype=float)
    if np.any(mu < 0) or np.any(np.diff(mu) < -1e-12 * max(1.0, np.max(mu))):
        raise ParameterError("mu(B_t) must be nonnegative and nondecreasing")
    if not np.any(mu > 0):
        return 0.0
    integrand = (mu * t ** (2 * k - n)) ** (1.0 / k)
    peak = float(np.max(integrand))
    if integrand[0] > 1e-9 * peak and integrand[0] >= integrand[1]:
        return math.inf
    return float(simpson(integrand, x=tau))


# ---- Holder probe ---------------------------------------------------------

@dataclass
class HolderFit:
    alpha: float
    radii: list
    residual: float


def _oscillation_grid(u: GridField, geo, radius: float) -> float:
    ball = geo.inside & (geo.R2 <= radius ** 2)
    vals = u.values[ball]
    return float(vals.max() - vals.min())


def holder_probe(u, spec: ProblemSpec | None = None, base_radius: float | None = None,
                 levels: int = 6, min_annulus_nodes: int = 8) -> HolderFit:
    """Least-squares exponent of log osc_{B_r(0)} u against log r.

    Dyadic radii r_j = 2^{-j} R/4; radii whose dyadic annulus holds fewer
    than ``min_annulus_nodes`` grid nodes are dropped, and at least five
    radii must survive.  Accepts a GridField or a RadialProfile.
    """
    radii = []
    oscs = []
    if isinstance(u, RadialProfile):
        base = base_radius if base_radius is not None else u.R / 4.0
        for j in range(levels):
            r_j = base * 2.0 ** (-j)
            inside = u.r <= r_j
            if inside.sum() < 2:
                continue
            osc = float(u.u[inside].max() - u.u[inside].min())
            if osc > 0:
                radii.append(r_j)
                oscs.append(osc)
    else:
        if spec is None:
            raise ParameterError("spec is required for grid fields")
        geo = grids.geometry(spec.domain, spec.h)
        base = base_radius if base_radius is not None else \
            spec.domain.bounding_radius / 4.0
        for j in range(levels):
            r_j = base * 2.0 ** (-j)
            annulus = geo.inside & (geo.R2 <= r_j ** 2) & (geo.R2 > (r_j / 2) ** 2)
            if int(annulus.sum()) < min_annulus_nodes:
                continue
            osc = _oscillation_grid(u, geo, r_j)
            if osc > 0:
                radii.append(r_j)
                oscs.append(osc)
    if len(radii) < 5:
        raise ParameterError(
            f"only {len(radii)} usable dyadic radii; need at least 5")
    x = np.log(np.asarray(radii))
    y = np.log(np.asarray(oscs))
    coeffs, res, *_ = np.polyfit(x, y, 1, full=True)
    alpha = float(coeffs[0])
    residual = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return HolderFit(alpha=alpha, radii=radii, residual=residual)


# ---- scaling law -----------------------------------------------------------

def scaling_law_check(spec: ProblemSpec, t: float, method: str = "auto"):
    """Observed vs expected eigenvalue ratio under domain dilation x -> t x.

    Homogeneity of S_k and the |x|^{2s} weight give
    lambda_1(t Omega) = t^{-2(1+s)} lambda_1(Omega).  The eigensolver runs
    on both domains: the radial shooting oracle on disks (method='radial',
    delta-free) or the grid continuation (method='grid', with the
    regularization delta scaled by t to preserve exact homogeneity).
    """
    from . import eigensolve

    if t <= 0:
        raise ParameterError("t must be positive")
    expected = t ** (-2.0 * (1.0 + spec.s))
    if method == "auto":
        method = "radial" if spec.domain.kind == "disk" else "grid"
    if method == "radial":
        if spec.domain.kind != "disk":
            raise ParameterError("radial scaling check needs a disk domain")
        R = spec.domain.radius
        lam_base = radial.shoot_eigen(spec.n, spec.k, spec.s, R,
                                      tol=1e-6).lambda1
        lam_scaled = radial.shoot_eigen(spec.n, spec.k, spec.s, t * R,
                                        tol=1e-6).lambda1
    else:
        lam_base, _ = eigensolve.find_lambda_delta(spec)
        scaled = spec.with_(domain=spec.domain.scaled(t), h=spec.h * t,
                            delta=spec.delta * t)
        lam_scaled, _ = eigensolve.find_lambda_delta(scaled)
    return lam_scaled / lam_base, expected


# ---- linearized eigenproblem ----------------------------------------------

def linearized_eigen(u: GridField, spec: ProblemSpec, tol: float = 1e-8,
                     max_iter: int = 400) -> float:
    """Principal eigenvalue of F^{ij}(D^2 u) d_ij v = -lam |x|^{2s} v, v = 0
    on the boundary, with coefficients frozen at the discrete Hessian of u.

    F = S_k^{1/k}; for k = 1 the operator is the Laplacian, for k = 2 (n=2)
    F^{ij} = cof(D^2 u) / (2 sqrt(det D^2 u)).  Weighted inverse power
    iteration against the (delta-regularized for s < 0) weight returns the
    smallest eigenvalue; the iterate must stay one-signed (discrete Perron
    property) and the frozen operator must be negative under the mask, else
    an admissibility error is raised.
    """
    spec.require_grid_supported()
    geo = grids.geometry(spec.domain, spec.h)
    uvec = u.values[geo.inside]
    if spec.k == 1:
        op = geo.laplacian.copy()
    else:
        hxx = geo.dxx @ uvec
        hyy = geo.dyy @ uvec
        hxy = 0.5 * (geo.dd1 @ uvec - geo.dd2 @ uvec)
        det = hxx * hyy - hxy * hxy
        floor = 1e-10 * max(float(np.max(np.abs(det))), 1e-300)
        if np.any(det <= 0):
            det = np.maximum(det, floor)
        root = np.sqrt(det)
        # cofactor pairs with the symmetrized cross-difference
        a11 = hyy / (2.0 * root)
        a22 = hxx / (2.0 * root)
        a12 = -hxy / (2.0 * root)
        op = (sp.diags(a11) @ geo.dxx + sp.diags(a22) @ geo.dyy
              + sp.diags(a12) @ (geo.dd1 - geo.dd2)).tocsr()

    w = grids.weight_values(geo.R2, spec.delta, spec.s)[geo.inside]
    if not np.all(np.isfinite(w)):
        raise ParameterError("weight is singular on the grid; use delta > 0")
    try:
        lu = spla.splu((-op).tocsc())
    except RuntimeError as exc:
        raise ConeError("frozen-coefficient operator is not invertible") from exc

    v = np.ones(geo.n_interior)
    v /= np.max(np.abs(v))
    lam = None
    for _ in range(max_iter):
        z = lu.solve(w * v)
        mu = float(np.max(np.abs(z)))
        if mu <= 0 or not np.isfinite(mu):
            raise ConeError("inverse iteration collapsed; operator not "
                            "positive definite on the mask")
        z /= mu
        drift = float(np.max(np.abs(z - v)))
        v = z
        lam_new = 1.0 / mu
        if lam is not None and abs(lam_new - lam) <= tol * lam_new and drift <= 1e-8:
            lam = lam_new
            break
        lam = lam_new
    else:
        raise NumericalError("linearized inverse iteration did not converge",
                             lam=lam)
    if np.min(v) < -1e-10:
        raise ConeError("principal eigenvector changes sign; Perron property "
                        "violated")
    if lam <= 0:
        raise ConeError("principal eigenvalue is not positive")
    return lam


def boundary_slope_check(u: GridField, spec: ProblemSpec) -> float:
    """min over boundary-adjacent inside nodes of (-u)/dist(x, boundary).

    A strictly positive value certifies the discrete Hopf behavior; an
    identically zero field returns 0 (degenerate, flagged by callers).
    """
    geo = grids.geometry(spec.domain, spec.h)
    inside = geo.inside
    adjacent = inside & ~(np.roll(inside, 1, 0) & np.roll(inside, -1, 0)
                          & np.roll(inside, 1, 1) & np.roll(inside, -1, 1))
    d = np.maximum(geo.boundary_distance, 1e-3 * spec.h)
    vals = (-u.values[adjacent]) / d[adjacent]
    if u.sup_norm() == 0.0:
        return 0.0
    return float(np.min(vals))
