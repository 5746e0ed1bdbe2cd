"""Eigenvalue location by the regularized continuation scheme.

lambda_delta is the solvability threshold of

    S_k(D^2 u) = [(|x|^2 + delta^2)^s (1 - lambda u)]^k,  u = 0 on the boundary:

below it the monotone source iteration converges, above it the iterates
grow without bound.  The threshold is located by bisection between a
convergent lower endpoint and a blown-up upper endpoint; the normalized
solution at the last convergent lambda approximates the eigenfunction.
Sweeping delta downward and extrapolating lambda_delta -> lambda_1
continues the regularized family to the singular/degenerate weight.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import dirichlet, grids, radial
from .errors import CeilingError, NumericalError, ParameterError
from .grids import GridField
from .problem import ProblemSpec


@dataclass
class EigenResult:
    """Eigenvalue estimate with its normalized eigenfunction."""

    lam: float
    field: GridField
    delta: float
    sup_norm_at_bracket: float
    residual: float
    iterations: dict

    def check_invariants(self):
        assert self.lam > 0
        assert abs(self.field.sup_norm() - 1.0) < 1e-14
        assert np.all(self.field.values[self.field.inside] <= 1e-14)


@dataclass
class SweepRow:
    delta: float
    lam: float
    K: float          # sup |x| |Du|
    L: float          # sup |x|^{2 beta} |D^2 u|
    Khat: float       # sup |Du|
    Lhat: float       # sup |D^2 u|


@dataclass
class SweepReport:
    rows: list
    lambda1: float
    method: str                   # 'richardson' | 'last_delta' | 'flat'
    fit_exponent: float | None
    fit_residual: float | None
    monotone_ok: bool
    monotone_direction: str
    results: list = field(default_factory=list)

    def to_csv(self, path, config: dict | None = None) -> None:
        with open(path, "w", encoding="ascii") as fh:
            if config is not None:
                fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
            fh.write("delta,lambda,K,L,Khat,Lhat\n")
            for r in self.rows:
                fh.write(f"{r.delta!r},{r.lam!r},{r.K!r},{r.L!r},"
                         f"{r.Khat!r},{r.Lhat!r}\n")
            fh.write(f"# extrapolated_lambda1 = {self.lambda1!r}\n")
            fh.write(f"# method = {self.method}\n")
            if self.fit_exponent is not None:
                fh.write(f"# fit_exponent = {self.fit_exponent!r}\n")
            if self.fit_residual is not None:
                fh.write(f"# fit_residual = {self.fit_residual!r}\n")
            fh.write(f"# monotone_ok = {self.monotone_ok}\n")

    def to_dict(self) -> dict:
        return {
            "rows": [{"delta": r.delta, "lambda": r.lam, "K": r.K, "L": r.L,
                      "Khat": r.Khat, "Lhat": r.Lhat} for r in self.rows],
            "lambda1": self.lambda1,
            "method": self.method,
            "fit_exponent": self.fit_exponent,
            "fit_residual": self.fit_residual,
            "monotone_ok": self.monotone_ok,
            "monotone_direction": self.monotone_direction,
        }


def _lambda_seed(spec: ProblemSpec) -> float:
    """Order-of-magnitude eigenvalue guess from the k=1 closed form.

    The eigenvalue scales like R^{-2(1+s)} for every k, so the Bessel value
    on the equal-scale disk seeds the bracket search."""
    return radial.bessel_weighted_eigen(max(spec.n, 2), spec.s,
                                        spec.reference_radius())


def find_lambda_delta(spec: ProblemSpec):
    """Bisection on the convergence/blow-up boundary of the source iteration.

    Returns (lambda_delta, EigenResult).  The lower endpoint of the final
    bracket converged and the upper endpoint blew up; lambda_delta is the
    bracket midpoint and the eigenfunction approximation is the normalized
    solution at the last convergent lambda.
    """
    spec.require_grid_supported()
    if spec.s < 0 and spec.delta <= 0:
        raise ParameterError("delta > 0 required when s < 0")
    seed = _lambda_seed(spec)
    ceiling = spec.lambda_ceiling_factor * seed

    outcomes: dict[float, dirichlet.PicardOutcome] = {}
    total_picard = 0

    def probe(lam: float) -> dirichlet.PicardOutcome:
        nonlocal total_picard
        out = dirichlet.solve_regularized_dirichlet(spec, lam)
        outcomes[lam] = out
        total_picard += out.iterations
        return out

    lo = 0.5 * seed
    attempts = 0
    while not probe(lo).converged:
        lo *= 0.5
        attempts += 1
        if attempts > 40:
            raise NumericalError("no convergence even at tiny lambda",
                                 lambda_low=lo)
    if lo == 0.0:
        raise NumericalError("no convergence at lambda = 0")
    hi = max(2.0 * lo, 1.5 * seed)
    while probe(hi).converged:
        lo = hi
        hi *= 2.0
        if hi > ceiling:
            raise CeilingError("no blow-up found below the lambda search "
                               f"ceiling {ceiling}", ceiling=ceiling)

    bisections = 0
    while (hi - lo) > spec.lambda_rel_tol * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if probe(mid).converged:
            lo = mid
        else:
            hi = mid
        bisections += 1

    lam_delta = 0.5 * (lo + hi)
    last = outcomes[lo]
    sup = last.field.sup_norm()
    normalized = last.field.with_values(last.field.values / sup)
    result = EigenResult(
        lam=lam_delta,
        field=normalized,
        delta=spec.delta,
        sup_norm_at_bracket=sup,
        residual=math.nan,
        iterations={
            "bisections": bisections,
            "picard_total": total_picard,
            "bracket": (lo, hi),
            "lower_converged": True,
            "upper_blewup": not outcomes[hi].converged,
            "monotone_violation": max(o.max_monotone_violation
                                      for o in outcomes.values()),
        },
    )
    result.residual = eigen_residual(result, spec)
    return lam_delta, result


def eigen_residual(result: EigenResult, spec: ProblemSpec) -> float:
    """Relative discrete residual of S_k(D^2 u) = (w_delta lambda |u|)^k.

    Evaluated with centered differences on interior nodes at least 2h from
    the origin and the boundary, normalized by the RHS norm; an identically
    zero field has no meaningful residual and yields NaN (flagged
    'undefined' by callers).
    """
    fld = result.field
    geo = grids.geometry(spec.domain, spec.h)
    if fld.sup_norm() == 0.0:
        return math.nan
    uxx, uxy, uyy = grids.hessian_centered(fld.values, fld.h)
    lhs = grids.sk_2x2(uxx, uxy, uyy, spec.k)
    w = grids.weight_values(geo.R2, spec.delta, spec.s)
    rhs = (w * result.lam * np.abs(fld.values)) ** spec.k
    mask = (geo.boundary_distance >= 2.0 * spec.h) & (geo.R2 >= (2.0 * spec.h) ** 2)
    mask &= geo.inside
    num = float(np.sqrt(np.mean((lhs[mask] - rhs[mask]) ** 2)))
    den = float(np.sqrt(np.mean(rhs[mask] ** 2)))
    if den == 0.0:
        return math.nan
    return num / den


def _richardson_fit(deltas, lams):
    """Fit lambda_delta = lambda1 + c * delta^q on the last three points.

    The exponent is constrained to [0.5, 2]; returns (lambda1, q) or None
    when the differences do not behave like a one-sided power law.
    """
    d1, d2, d3 = deltas[-3:]
    l1, l2, l3 = lams[-3:]
    num = l2 - l3
    den = l1 - l2
    if den == 0 or num == 0 or (num / den) <= 0:
        return None

    def g(q):
        return (d2 ** q - d3 ** q) / (d1 ** q - d2 ** q) - num / den

    from scipy.optimize import brentq
    try:
        if g(0.5) * g(2.0) > 0:
            return None
        q = brentq(g, 0.5, 2.0, xtol=1e-10)
    except ValueError:
        return None
    c = (l1 - l2) / (d1 ** q - d2 ** q)
    lam1 = l3 - c * d3 ** q
    return lam1, q, c


def sweep_delta(spec: ProblemSpec, deltas, beta: float = 1.5,
                jobs: int = 1) -> SweepReport:
    """Run find_lambda_delta per delta and continue delta -> 0.

    Checks the monotonicity direction implied by sign(s) (for s > 0 the
    threshold increases as delta shrinks, for s < 0 it decreases) and
    extrapolates lambda_1 by a Richardson fit on the last three points.
    A poor fit (residual over 10%, or unusable exponent) downgrades the
    report to the lambda at the smallest delta.
    """
    from .verify import estimate_norms

    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas):
        raise ParameterError("all deltas must be positive")
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ParameterError("deltas must be strictly decreasing")

    def run_one(d):
        lam, res = find_lambda_delta(spec.with_(delta=d))
        return lam, res

    results = [None] * len(deltas)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for i, out in enumerate(pool.map(run_one, deltas)):
                results[i] = out
    else:
        for i, d in enumerate(deltas):
            results[i] = run_one(d)

    rows = []
    for d, (lam, res) in zip(deltas, results):
        rep = estimate_norms(res.field, spec.with_(delta=d), beta=beta)
        rows.append(SweepRow(d, lam, rep.K, rep.L_beta, rep.K_hat, rep.L_hat))

    lams = [r.lam for r in rows]
    # deltas decrease along the sweep; for s > 0 Step-1 monotonicity gives
    # lambda nondecreasing along the sweep, for s < 0 nonincreasing
    slack = spec.lambda_rel_tol * max(lams)
    if spec.s > 0:
        ok = all(b >= a - slack for a, b in zip(lams, lams[1:]))
        direction = "nondecreasing as delta shrinks"
    elif spec.s < 0:
        ok = all(b <= a + slack for a, b in zip(lams, lams[1:]))
        direction = "nonincreasing as delta shrinks"
    else:
        ok = max(lams) - min(lams) <= 2 * slack
        direction = "constant (s = 0)"

    method = "last_delta"
    lam1 = lams[-1]
    q = None
    fit_residual = None
    if len(rows) >= 3:
        spread = max(lams) - min(lams)
        if spread <= spec.lambda_rel_tol * max(lams):
            method = "flat"
            lam1 = lams[-1]
        else:
            fit = _richardson_fit(deltas, lams)
            if fit is not None:
                cand, q, c = fit
                model = [cand + c * d ** q for d in deltas]
                fit_residual = max(abs(m - l) / abs(l)
                                   for m, l in zip(model, lams))
                if fit_residual <= 0.10 and cand > 0:
                    method = "richardson"
                    lam1 = cand
    return SweepReport(rows=rows, lambda1=lam1, method=method,
                       fit_exponent=q, fit_residual=fit_residual,
                       monotone_ok=ok, monotone_direction=direction,
                       results=[res for _, res in results])


def inverse_power_iteration(spec: ProblemSpec, max_outer: int = 60,
                            u0: GridField | None = None,
                            lambda0: float | None = None,
                            tol: float = 1e-6) -> EigenResult:
    """Fixed-point cross-check: iterate S_k(D^2 u_{m+1}) = (w lam_m |u_m|)^k.

    After each inner Dirichlet solve the iterate is renormalized to unit sup
    norm and lambda is updated by the k-homogeneity relation lam <- lam/mu,
    mu the pre-normalization sup.  Agreement with find_lambda_delta is a
    consistency check, not the primary path; non-convergence is reported as
    a diagnostic error so the suite can fall back.
    """
    spec.require_grid_supported()
    geo = grids.geometry(spec.domain, spec.h)
    w = grids.weight_values(geo.R2, spec.delta, spec.s)

    def solve_with_source(vals):
        src = geo.field(vals)
        if spec.k == 1:
            return dirichlet.solve_poisson(spec, src)
        return dirichlet.solve_monge_ampere_2d(spec, src)

    if u0 is None:
        base = solve_with_source(w ** spec.k)
        u = base.with_values(base.values / base.sup_norm())
    else:
        u = u0.with_values(u0.values / u0.sup_norm())
    if lambda0 is None:
        probe = solve_with_source((w * np.abs(u.values)) ** spec.k)
        lam = 1.0 / probe.sup_norm()
    else:
        lam = float(lambda0)

    outer = 0
    for outer in range(1, max_outer + 1):
        raw = solve_with_source((w * lam * np.abs(u.values)) ** spec.k)
        mu = raw.sup_norm()
        if mu == 0.0:
            raise NumericalError("inverse power iterate vanished")
        u_next = raw.with_values(raw.values / mu)
        drift = float(np.max(np.abs(u_next.values - u.values)))
        lam_next = lam / mu
        converged = abs(mu - 1.0) <= tol and drift <= tol
        u, lam = u_next, lam_next
        if converged:
            break
    else:
        raise NumericalError("inverse power iteration did not converge",
                             outer=max_outer, lam=lam)
    result = EigenResult(lam=lam, field=u, delta=spec.delta,
                         sup_norm_at_bracket=math.nan, residual=math.nan,
                         iterations={"outer": outer})
    result.residual = eigen_residual(result, spec)
    return result
