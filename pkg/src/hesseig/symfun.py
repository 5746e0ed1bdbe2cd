"""Elementary symmetric polynomials, Garding cones and dual-cone quantities.

Everything here operates on eigenvalue vectors ``lam = (lam_1, ..., lam_n)``
or on symmetric matrices whose upper triangle is authoritative.  The core
objects are

    sigma_k(lam)      k-th elementary symmetric polynomial,
    Gamma_k           {lam : sigma_j(lam) > 0 for j = 1..k},
    S_k(H)            sigma_k of the eigenvalues of a symmetric matrix H,
    S_k^{ij}(H)       derivative matrix dS_k/dH_ij,
    rho_k(xi)         (sigma_k(xi) / C(n,k))^(1/k),
    rho_k_star(A)     inf { lam(A).xi / n : xi in Gamma_k, rho_k(xi) >= 1 }.

All functions are pure; arrays are never mutated.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConeError, DualConeError, NumericalError, ParameterError

_MAX_N = 16


def _as_vector(lam) -> np.ndarray:
    v = np.asarray(lam, dtype=float).ravel()
    if v.size < 1:
        raise ParameterError("eigenvalue vector must have length >= 1")
    if v.size > _MAX_N:
        raise ParameterError(f"n = {v.size} exceeds supported maximum {_MAX_N}")
    if not np.all(np.isfinite(v)):
        raise ParameterError("eigenvalue vector must be finite")
    return v


def elementary_all(lam) -> np.ndarray:
    """All elementary symmetric values ``[sigma_0, ..., sigma_n]`` of lam.

    O(n^2) dynamic program over prefix elementary values: processing one
    entry x updates e_j <- e_j + x * e_{j-1} for j descending.  Exact for
    integer inputs, stable for mixed signs.
    """
    v = _as_vector(lam)
    n = v.size
    e = np.zeros(n + 1)
    e[0] = 1.0
    for i, x in enumerate(v):
        top = min(i + 1, n)
        for j in range(top, 0, -1):
            e[j] += x * e[j - 1]
    return e


def sigma(lam, k: int) -> float:
    """sigma_k(lam), the sum of all k-fold products of distinct entries."""
    v = _as_vector(lam)
    if not 1 <= k <= v.size:
        raise ParameterError(f"k = {k} out of range 1..{v.size}")
    return float(elementary_all(v)[k])


def sigma_partial(lam, k: int, i: int) -> float:
    """sigma_{k;i}(lam) = sigma_k with entry ``i`` deleted (0-based index).

    Equals d sigma_{k+1} / d lam_i and satisfies
    sigma_k(lam) = sigma_{k;i}(lam) + lam_i * sigma_{k-1;i}(lam).
    By convention sigma_{0;i} = 1.
    """
    v = _as_vector(lam)
    if not 0 <= i < v.size:
        raise ParameterError(f"index i = {i} out of range 0..{v.size - 1}")
    if not 0 <= k <= v.size - 1:
        raise ParameterError(f"k = {k} out of range 0..{v.size - 1}")
    if k == 0:
        return 1.0
    reduced = np.delete(v, i)
    return float(elementary_all(reduced)[k])


def cone_classify(lam) -> int:
    """Largest k with sigma_1, ..., sigma_k all strictly positive (0 if none).

    Strictness is decided against exact zero; callers add their own margins.
    Membership is nested: the result k_max means lam lies in Gamma_j for all
    j <= k_max and in no larger cone.
    """
    v = _as_vector(lam)
    e = elementary_all(v)
    k_max = 0
    for j in range(1, v.size + 1):
        if e[j] > 0.0:
            k_max = j
        else:
            break
    return k_max


def in_cone(lam, k: int) -> bool:
    """True when lam lies in the open cone Gamma_k."""
    return cone_classify(lam) >= k


def _symmetrize(H) -> np.ndarray:
    """Materialize a symmetric matrix from the upper triangle of H."""
    a = np.asarray(H, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError("matrix must be square")
    if a.shape[0] > _MAX_N:
        raise ParameterError(f"n = {a.shape[0]} exceeds supported maximum {_MAX_N}")
    upper = np.triu(a)
    return upper + upper.T - np.diag(np.diag(a))


def jacobi_eigh(H, off_tol: float = 1e-14, max_sweeps: int = 64):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps annihilate off-diagonal entries until their Frobenius norm drops
    below ``off_tol`` relative to the matrix scale.  Returns (eigenvalues,
    eigenvectors) with eigenvectors as columns; no ordering is imposed.
    """
    a = _symmetrize(H)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.max(np.abs(a)), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(a, -1) ** 2)))
        if off <= off_tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= off_tol * scale * 1e-2:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    else:
        raise NumericalError("Jacobi eigen-decomposition did not converge",
                             off_diagonal=float(np.sum(np.tril(a, -1) ** 2)))
    return np.diag(a).copy(), v


def hessian_sk(H, k: int) -> float:
    """S_k(H) = sigma_k of the eigenvalues of the symmetric matrix H."""
    lam, _ = jacobi_eigh(H)
    return sigma(lam, k)


def linearized_coeffs(H, k: int) -> np.ndarray:
    """Derivative matrix S_k^{ij}(H) = dS_k/dH_ij, assembled in the eigenbasis.

    With H = V diag(lam) V^T the result is V diag(sigma_{k-1;i}(lam)) V^T,
    which is positive definite whenever lam lies in Gamma_k.
    """
    a = _symmetrize(H)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k = {k} out of range 1..{n}")
    lam, vec = jacobi_eigh(a)
    if not in_cone(lam, k):
        raise ConeError(f"matrix eigenvalues {lam} not in Gamma_{k}")
    d = np.array([sigma_partial(lam, k - 1, i) for i in range(n)])
    out = vec @ np.diag(d) @ vec.T
    return 0.5 * (out + out.T)


def f_derivative_coeffs(H, k: int) -> np.ndarray:
    """Derivative matrix of F = S_k^(1/k): (1/k) S_k^{(1-k)/k} S_k^{ij}."""
    sk = hessian_sk(H, k)
    if sk <= 0.0:
        raise ConeError(f"S_{k}(H) = {sk} is not positive")
    return (sk ** ((1.0 - k) / k) / k) * linearized_coeffs(H, k)


def rho_k(lam, k: int) -> float:
    """Normalized k-th root mean {sigma_k(lam)/C(n,k)}^(1/k); rho_k(1,...,1) = 1."""
    v = _as_vector(lam)
    if not 1 <= k <= v.size:
        raise ParameterError(f"k = {k} out of range 1..{v.size}")
    if not in_cone(v, k):
        raise ConeError(f"{tuple(v)} is not in Gamma_{k}")
    return (sigma(v, k) / math.comb(v.size, k)) ** (1.0 / k)


def _sigma_grad(xi: np.ndarray, j: int) -> np.ndarray:
    # d sigma_j / d xi_i = sigma_{j-1;i}
    return np.array([sigma_partial(xi, j - 1, i) for i in range(xi.size)])


def _sigma_hess(xi: np.ndarray, j: int) -> np.ndarray:
    # d^2 sigma_j / d xi_i d xi_l = sigma_{j-2;il} for i != l, zero on the diagonal
    n = xi.size
    h = np.zeros((n, n))
    if j < 2:
        return h
    for i in range(n):
        for l in range(i + 1, n):
            reduced = np.delete(xi, (i, l))
            val = 1.0 if j == 2 else float(elementary_all(reduced)[j - 2])
            h[i, l] = h[l, i] = val
    return h


def rho_k_star(A, k: int, tol: float = 1e-8, max_iter: int = 200) -> float:
    """Dual-cone support value inf { lam(A).xi / n : xi in Gamma_k, rho_k(xi) >= 1 }.

    Log-barrier interior-point minimization of the linear objective over the
    convex set {rho_k(xi) >= 1} (rho_k is concave on Gamma_k, so its
    superlevel set is convex).  The barrier

        Phi_mu(xi) = a.xi/n - mu [ log(rho_k(xi) - 1) + sum_{j<k} log sigma_j(xi) ]

    is minimized by damped Newton steps; mu is reduced geometrically until the
    barrier duality gap falls below ``tol`` relative to the objective.  By
    homogeneity the infimum is attained on the constraint boundary, which the
    central path approaches from inside.  A feasible point with negative
    objective proves unboundedness (scaling it up stays feasible), reported
    as a dual-cone violation.
    """
    a, _ = jacobi_eigh(A)
    n = a.size
    if not 1 <= k <= n:
        raise ParameterError(f"k = {k} out of range 1..{n}")
    scale = max(float(np.max(np.abs(a))), 1e-300)
    grad_obj = a / n
    n_constraints = k

    def feasible(xi):
        return in_cone(xi, k) and rho_k(xi, k) > 1.0

    def barrier_parts(xi):
        """(value, gradient, hessian) of the barrier term."""
        val = 0.0
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        rho = rho_k(xi, k)
        sk = sigma(xi, k)
        gk = _sigma_grad(xi, k)
        # rho gradient/hessian through log sigma_k
        glog = gk / (k * sk)
        hlog = _sigma_hess(xi, k) / (k * sk) - np.outer(gk, gk) / (k * sk * sk)
        grho = rho * glog
        hrho = rho * (np.outer(glog, glog) + hlog)
        gap = rho - 1.0
        val -= math.log(gap)
        grad -= grho / gap
        hess += np.outer(grho, grho) / gap ** 2 - hrho / gap
        for j in range(1, k):
            sj = sigma(xi, j)
            gj = _sigma_grad(xi, j)
            val -= math.log(sj)
            grad -= gj / sj
            hess += np.outer(gj, gj) / sj ** 2 - _sigma_hess(xi, j) / sj
        return val, grad, hess

    xi = 2.0 * np.ones(n)
    mu = max(float(grad_obj @ xi), scale) / n_constraints
    f = float(grad_obj @ xi)
    for _ in range(max_iter):
        for _ in range(50):
            _, bgrad, bhess = barrier_parts(xi)
            grad = grad_obj + mu * bgrad
            hess = mu * bhess
            # convexity can degrade numerically far from the path; floor eigenvalues
            w, v = np.linalg.eigh(hess)
            w = np.maximum(w, 1e-12 * max(np.max(np.abs(w)), 1e-30))
            delta = -(v @ ((v.T @ grad) / w))
            lam_dec = float(-grad @ delta)
            if lam_dec <= 2.0 * tol * max(abs(f), mu):
                break
            t = 1.0
            while t > 1e-14 and not feasible(xi + t * delta):
                t *= 0.5
            phi0 = float(grad_obj @ xi) + mu * barrier_parts(xi)[0]
            while t > 1e-14:
                cand = xi + t * delta
                if feasible(cand):
                    phi = float(grad_obj @ cand) + mu * barrier_parts(cand)[0]
                    if phi <= phi0 - 0.25 * t * lam_dec:
                        break
                t *= 0.5
            if t <= 1e-14:
                break
            xi = xi + t * delta
            f = float(grad_obj @ xi)
            if f < -1e-10 * scale:
                raise DualConeError(
                    f"objective reached {f}: lam(A).xi unbounded below on Gamma_{k}")
        if mu * n_constraints <= tol * max(abs(f), 1e-30):
            return f
        mu *= 0.15
    raise NumericalError("rho_k_star minimization did not converge",
                         value=f, barrier=mu)
