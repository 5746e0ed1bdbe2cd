"""Grid Dirichlet solvers: weighted Poisson, 2-D Monge-Ampere, and the
monotone source iteration for S_k(D^2 u) = [(|x|^2 + delta^2)^s (1 - lambda u)]^k.

The Poisson path factorizes the Shortley-Weller Laplacian once per
(domain, h) and reuses it across every Picard step and every lambda probe.
The Monge-Ampere path combines a monotone wide-stencil phase (axis pair
plus diagonal pair, directional second differences clamped at zero) with
Newton polishing on the consistent cut-cell determinant; the monotone
phase supplies globalization and the discrete-convexity semantics, Newton
restores second-order accuracy.

The Picard iteration u_{m+1} = S(source(x, u_m)) starts from the zero
supersolution and is monotone non-increasing; divergence (lambda beyond
the solvability threshold) is a distinguished outcome, detected either by
the magnitude cap or by a persistently growing increment sequence, and is
consumed by the eigenvalue bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grids
from .errors import NumericalError, ParameterError
from .grids import GridField, GridGeometry, geometry
from .problem import ProblemSpec

_LU_CACHE: dict = {}


def _laplacian_lu(geo: GridGeometry):
    key = (geo.domain, geo.h, "lap")
    lu = _LU_CACHE.get(key)
    if lu is None:
        lu = spla.splu(geo.laplacian.tocsc())
        _LU_CACHE[key] = lu
    return lu


def solve_poisson(spec: ProblemSpec, source: GridField) -> GridField:
    """Solve Delta_h u = source on interior nodes, u = 0 outside.

    Five-point Shortley-Weller stencil with shortened boundary arms; the
    factorized operator is cached per (domain, h).  The discrete residual
    must reach poisson_residual_factor * ||source||_inf or a numerical
    error carrying the residual is raised.
    """
    spec.require_grid_supported()
    geo = geometry(spec.domain, spec.h)
    f = source.values[geo.inside]
    if not np.all(np.isfinite(f)):
        raise ParameterError("source must be finite on the domain mask")
    lu = _laplacian_lu(geo)
    u = lu.solve(f)
    resid = geo.laplacian @ u - f
    scale = float(np.max(np.abs(f))) if f.size else 0.0
    tol = spec.poisson_residual_factor * max(scale, 1e-300)
    if float(np.max(np.abs(resid))) > tol:
        u = u - lu.solve(resid)
        resid = geo.laplacian @ u - f
        if float(np.max(np.abs(resid))) > tol:
            raise NumericalError("Poisson solve residual too large",
                                 residual=float(np.max(np.abs(resid))))
    return geo.field_from_vector(u)


# ---- Monge-Ampere ------------------------------------------------------

def _ma_parts(geo: GridGeometry, u: np.ndarray):
    """Directional second differences of the interior vector u."""
    hxx = geo.dxx @ u
    hyy = geo.dyy @ u
    hd1 = geo.dd1 @ u
    hd2 = geo.dd2 @ u
    return hxx, hyy, hd1, hd2


def monotone_ma_residual(geo: GridGeometry, u: np.ndarray, f: np.ndarray):
    """Wide-stencil operator: min over the two orthogonal pairs of clamped
    second-difference products, minus the source."""
    hxx, hyy, hd1, hd2 = _ma_parts(geo, u)
    axes = np.maximum(hxx, 0.0) * np.maximum(hyy, 0.0)
    diag = np.maximum(hd1, 0.0) * np.maximum(hd2, 0.0)
    return np.minimum(axes, diag) - f


def consistent_ma_residual(geo: GridGeometry, u: np.ndarray, f: np.ndarray):
    """Cut-cell determinant u_xx u_yy - u_xy^2 with u_xy from the diagonal
    second differences (u_xy = (D_d1 - D_d2)/2)."""
    hxx, hyy, hd1, hd2 = _ma_parts(geo, u)
    hxy = 0.5 * (hd1 - hd2)
    return hxx * hyy - hxy * hxy - f


def _ma_jacobian(geo: GridGeometry, u: np.ndarray) -> sp.csr_matrix:
    hxx, hyy, hd1, hd2 = _ma_parts(geo, u)
    hxy = 0.5 * (hd1 - hd2)
    jac = (sp.diags(hyy) @ geo.dxx + sp.diags(hxx) @ geo.dyy
           - sp.diags(hxy) @ (geo.dd1 - geo.dd2))
    return jac.tocsr()


def _monotone_sweeps(geo: GridGeometry, u: np.ndarray, f: np.ndarray,
                     sweeps: int, damping: float = 0.9) -> np.ndarray:
    """Damped Jacobi sweeps of the per-node wide-stencil root update."""
    dxx_diag = geo.dxx.diagonal()
    dyy_diag = geo.dyy.diagonal()
    dd1_diag = geo.dd1.diagonal()
    dd2_diag = geo.dd2.diagonal()
    for _ in range(sweeps):
        hxx, hyy, hd1, hd2 = _ma_parts(geo, u)
        u_new = np.full_like(u, np.inf)
        for (ha, hb, ca, cb) in (
                (hxx, hyy, -dxx_diag, -dyy_diag),
                (hd1, hd2, -dd1_diag, -dd2_diag)):
            # neighbor parts a = H + c*u; solve (a_v - c_v w)(a_w - c_w w) = f
            # on the branch where both factors are nonnegative (smaller root);
            # the min-over-pairs operator equals f at the min of the roots
            av = ha + ca * u
            aw = hb + cb * u
            aa = ca * cb
            bb = av * cb + aw * ca
            cc = av * aw - f
            disc = np.maximum(bb * bb - 4.0 * aa * cc, 0.0)
            root = (bb - np.sqrt(disc)) / (2.0 * aa)
            u_new = np.minimum(u_new, root)
        u = (1.0 - damping) * u + damping * u_new
    return u


def solve_monge_ampere_2d(spec: ProblemSpec, source: GridField,
                          u0: GridField | None = None,
                          workspace: dict | None = None) -> GridField:
    """Discrete convex solution of det D^2 u = source, u = 0 on the boundary.

    Phase 1 iterates the monotone wide-stencil root update (convexity
    enforced by clamping directional second differences at zero).  Phase 2
    applies damped Newton to the consistent cut-cell determinant, keeping
    iterates directionally convex; this restores O(h^2)-level accuracy that
    the two-pair stencil alone cannot reach.

    ``workspace`` persists the Jacobian factorization between calls with
    nearby solutions (source continuation); a stale factorization is reused
    while it still halves the residual and refreshed otherwise.
    """
    spec.require_grid_supported()
    geo = geometry(spec.domain, spec.h)
    f = source.values[geo.inside].astype(float)
    if np.any(f < 0):
        raise ParameterError("Monge-Ampere source must be nonnegative")
    if not np.all(np.isfinite(f)):
        raise ParameterError("source must be finite on the domain mask")
    if not np.any(f > 0):
        return geo.field_from_vector(np.zeros(geo.n_interior))

    if u0 is not None:
        u = u0.values[geo.inside].astype(float).copy()
    else:
        # convex initializer: Poisson solve of 2 sqrt(f) (exact when f is
        # the determinant of an isotropic Hessian)
        lu = _laplacian_lu(geo)
        u = lu.solve(2.0 * np.sqrt(f))
        u = _monotone_sweeps(geo, u, f, sweeps=60)

    f_scale = max(float(np.max(f)), 1e-300)
    tol = spec.ma_tol * f_scale
    ws = workspace if workspace is not None else {}

    def refresh_lu(u_at):
        jac = _ma_jacobian(geo, u_at)
        jac = jac + sp.identity(geo.n_interior, format="csr") * (1e-12 * f_scale)
        try:
            ws["lu"] = spla.splu(jac.tocsc())
        except RuntimeError as exc:
            raise NumericalError("Monge-Ampere Jacobian factorization failed") \
                from exc

    resid = consistent_ma_residual(geo, u, f)
    best_norm = float(np.max(np.abs(resid)))
    refreshes = 0
    fallbacks = 0
    fresh = False
    for _ in range(spec.ma_max_newton):
        if best_norm <= tol:
            break
        if "lu" not in ws:
            refresh_lu(u)
            fresh = True
        delta = ws["lu"].solve(-resid)
        t = 1.0
        while t >= 1e-6:
            cand = u + t * delta
            cand_norm = float(np.max(np.abs(consistent_ma_residual(geo, cand, f))))
            if cand_norm <= (1.0 - 0.25 * t) * best_norm:
                break
            t *= 0.5
        made_progress = t >= 1e-6 and cand_norm <= 0.5 * best_norm
        if t >= 1e-6:
            u = cand
            resid = consistent_ma_residual(geo, u, f)
            best_norm = cand_norm
        if not made_progress:
            if not fresh:
                refresh_lu(u)      # stale factorization: refresh and retry
                fresh = True
                refreshes += 1
                continue
            # fresh Jacobian still stalling: monotone sweeps reshape the iterate
            u = _monotone_sweeps(geo, u, f, sweeps=80)
            resid = consistent_ma_residual(geo, u, f)
            best_norm = float(np.max(np.abs(resid)))
            ws.pop("lu", None)
            fresh = False
            fallbacks += 1
            if fallbacks > 6:
                raise NumericalError("Monge-Ampere Newton stalled",
                                     residual=best_norm)
        else:
            fresh = False
    else:
        raise NumericalError("Monge-Ampere solve did not converge",
                             residual=best_norm)
    return geo.field_from_vector(u)


def ma_convexity_violation(spec: ProblemSpec, fld: GridField) -> float:
    """Most negative directional second difference of a solution (0 if convex)."""
    geo = geometry(spec.domain, spec.h)
    u = fld.values[geo.inside]
    hxx, hyy, hd1, hd2 = _ma_parts(geo, u)
    return float(min(hxx.min(), hyy.min(), hd1.min(), hd2.min(), 0.0))


# ---- regularized source iteration --------------------------------------

@dataclass
class PicardOutcome:
    """Result of one source iteration run at fixed (lambda, delta).

    status is 'converged' or 'blowup'; 'blowup' is a distinguished outcome,
    not an error, consumed by the eigenvalue bisection.
    """

    status: str
    field: GridField | None
    iterations: int
    sup_norms: list = field(default_factory=list)
    max_monotone_violation: float = 0.0
    accelerated: bool = False
    reason: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _regularized_source(geo: GridGeometry, spec: ProblemSpec, lam: float,
                        u_vals: np.ndarray) -> np.ndarray:
    w = grids.weight_values(geo.R2, spec.delta, spec.s)
    return (w * (1.0 - lam * u_vals)) ** spec.k


def solve_regularized_dirichlet(spec: ProblemSpec, lam: float) -> PicardOutcome:
    """Monotone Picard iteration for S_k(D^2 u) = [(|x|^2+d^2)^s (1-lambda u)]^k.

    u_0 = 0 is a supersolution; since the source grows as u decreases and
    both inner solvers are monotone, the iterates decrease toward the fixed
    point when one exists and decrease without bound otherwise.  Iterates
    that rise by more than the monotone slack raise a numerical error
    (oscillation).  Convergence may be accelerated by a verified Aitken
    extrapolation of the geometric tail; every accelerated jump is validated
    by one further solver application before acceptance.
    """
    spec.require_grid_supported()
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    geo = geometry(spec.domain, spec.h)
    zero = geo.field_from_vector(np.zeros(geo.n_interior))
    ma_workspace: dict = {}

    def apply_solver(fld: GridField, warm: GridField | None) -> GridField:
        src_vals = _regularized_source(geo, spec, lam, fld.values)
        src = geo.field(src_vals)
        if spec.k == 1:
            return solve_poisson(spec, src)
        return solve_monge_ampere_2d(spec, src, u0=warm, workspace=ma_workspace)

    u = zero
    prev_diff_norm = math.inf
    growth_run = 0
    sup_norms = []
    max_violation = 0.0
    plain_diffs = []           # increments of consecutive plain steps
    accelerated = False
    m = 0
    while m < spec.picard_max_iter:
        m += 1
        u_next = apply_solver(u, u if m > 1 else None)
        d = u_next.values - u.values
        diff_norm = float(np.max(np.abs(d[geo.inside])))
        rise = float(np.max(d[geo.inside])) if geo.n_interior else 0.0
        max_violation = max(max_violation, rise)
        sup = u_next.sup_norm()
        sup_norms.append(sup)
        scale = max(1.0, sup)
        if rise > spec.monotone_slack * scale and m > 1 and not accelerated:
            raise NumericalError("source iteration is non-monotone",
                                 rise=rise, iteration=m)
        if lam == 0.0 or diff_norm <= spec.picard_tol * scale:
            return PicardOutcome("converged", u_next, m, sup_norms,
                                 max_violation, accelerated)
        if sup > spec.blowup_value_cap:
            return PicardOutcome("blowup", None, m, sup_norms, max_violation,
                                 accelerated, reason="magnitude cap")
        ratio = diff_norm / prev_diff_norm if math.isfinite(prev_diff_norm) else 0.0
        plain_diffs.append(diff_norm)
        if m > 6 and ratio > 1.0:
            growth_run += 1
        else:
            growth_run = 0
        if growth_run >= spec.divergence_window:
            return PicardOutcome("blowup", None, m, sup_norms, max_violation,
                                 accelerated, reason="growing increments")
        # verified Aitken jump once the geometric tail has stabilized; the
        # spread gate scales with 1 - rho so near-threshold runs (rho -> 1)
        # still accelerate once the ratio estimate is accurate enough
        if m >= 8 and len(plain_diffs) >= 4 and 0.2 < ratio < 0.99995:
            recent = [plain_diffs[-i] / plain_diffs[-i - 1] for i in range(1, 4)]
            rho = sum(recent) / 3.0
            if rho < 1.0 and max(recent) - min(recent) < max(
                    0.05 * (1.0 - rho), 1e-6):
                jump = geo.field(u_next.values + d * (rho / (1.0 - rho)))
                probe = apply_solver(jump, u_next)
                probe_diff = float(np.max(np.abs(
                    (probe.values - jump.values)[geo.inside])))
                m += 1
                sup_norms.append(probe.sup_norm())
                if probe.sup_norm() > spec.blowup_value_cap:
                    return PicardOutcome("blowup", None, m, sup_norms,
                                         max_violation, True,
                                         reason="magnitude cap after jump")
                if probe_diff <= spec.picard_tol * max(1.0, probe.sup_norm()):
                    return PicardOutcome("converged", probe, m, sup_norms,
                                         max_violation, accelerated=True)
                u = probe
                prev_diff_norm = math.inf
                plain_diffs = []
                accelerated = True
                continue
        u = u_next
        prev_diff_norm = diff_norm
    # iteration cap: classify by the increment tail; a decreasing tail means
    # the scheme is contracting (lambda below the threshold)
    tail = plain_diffs[-min(5, len(plain_diffs)):]
    if len(tail) > 1 and tail[-1] < tail[0]:
        return PicardOutcome("converged", u, m, sup_norms, max_violation,
                             accelerated, reason="iteration cap, contracting")
    return PicardOutcome("blowup", None, m, sup_norms, max_violation,
                         accelerated, reason="iteration cap, growing tail")
