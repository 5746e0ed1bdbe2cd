"""Radial-oracle tests: closed forms, shooting, cross-oracle agreement."""

import math

import numpy as np
import pytest

from hesseig import radial, symfun
from hesseig.errors import ParameterError

J01 = 2.404825557695773
LAM_DISK_K1 = J01 ** 2


class TestRadialSk:
    def test_quadratic_ball(self):
        # u = (r^2 - 1)/2: all Hessian eigenvalues 1, S_2 = C(3,2)
        assert radial.radial_sk(1.0, 1.0, 1.0, n=3, k=2) == pytest.approx(3.0)

    def test_quartic(self):
        r = 0.7
        got = radial.radial_sk(4 * r ** 3, 12 * r ** 2, r, n=2, k=2)
        assert got == pytest.approx(48 * r ** 4, rel=1e-12)

    def test_matches_symfun_on_assembled_hessian(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            n = int(rng.integers(2, 6))
            k = int(rng.integers(1, n + 1))
            r = float(rng.uniform(0.2, 2.0))
            du = float(rng.uniform(0.1, 3.0))
            ddu = float(rng.uniform(-2.0, 3.0))
            xhat = rng.standard_normal(n)
            xhat /= np.linalg.norm(xhat)
            hess = (ddu - du / r) * np.outer(xhat, xhat) + (du / r) * np.eye(n)
            want = symfun.hessian_sk(hess, k)
            got = radial.radial_sk(du, ddu, r, n, k)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-11)

    def test_divergence_form_consistency(self):
        # pointwise S_k equals (C(n-1,k-1)/k) r^{1-n} d/dr[r^{n-k} (u')^k]
        n, k = 3, 2
        r = np.linspace(0.3, 1.5, 2001)
        h = r[1] - r[0]
        u_prime = np.sin(r) + 1.5          # positive, smooth
        u_second = np.cos(r)
        flux = r ** (n - k) * u_prime ** k
        dflux = np.gradient(flux, h)
        divform = (math.comb(n - 1, k - 1) / k) * r ** (1 - n) * dflux
        direct = radial.radial_sk(u_prime, u_second, r, n, k)
        assert np.max(np.abs(divform[2:-2] - direct[2:-2])) < 5e-6


class TestBesselZero:
    def test_j0_first_zero(self):
        assert radial.first_bessel_zero(0.0) == pytest.approx(J01, abs=1e-12)

    def test_half_order_is_pi(self):
        assert radial.first_bessel_zero(0.5) == pytest.approx(math.pi, abs=1e-12)


class TestBesselWeightedEigen:
    def test_disk_laplacian(self):
        assert radial.bessel_weighted_eigen(2, 0.0, 1.0) == pytest.approx(
            LAM_DISK_K1, rel=1e-12)

    def test_weighted_disk(self):
        assert radial.bessel_weighted_eigen(2, -0.25, 1.0) == pytest.approx(
            (0.75 * J01) ** 2, rel=1e-12)

    def test_ball_3d(self):
        assert radial.bessel_weighted_eigen(3, 0.0, 1.0) == pytest.approx(
            math.pi ** 2, rel=1e-12)

    def test_radius_scaling(self):
        lam1 = radial.bessel_weighted_eigen(2, 0.5, 1.0)
        lam2 = radial.bessel_weighted_eigen(2, 0.5, 2.0)
        assert lam2 == pytest.approx(lam1 * 2.0 ** (-3.0), rel=1e-12)


class TestShootEigen:
    def test_cross_oracle_agreement(self):
        for n in (2, 3):
            for s in (-0.25, 0.0, 0.5):
                want = radial.bessel_weighted_eigen(n, s, 1.0)
                got = radial.shoot_eigen(n, 1, s, 1.0, tol=1e-7).lambda1
                assert got == pytest.approx(want, rel=1e-6)

    def test_monge_ampere_radius_scaling(self):
        lam1 = radial.shoot_eigen(2, 2, 0.0, 1.0, tol=1e-7).lambda1
        lam2 = radial.shoot_eigen(2, 2, 0.0, 2.0, tol=1e-7).lambda1
        assert lam2 == pytest.approx(lam1 / 4.0, rel=1e-6)

    def test_profile_invariants_and_admissibility(self):
        res = radial.shoot_eigen(3, 2, -0.2, 1.0, tol=1e-6)
        res.profile.check_invariants()
        assert res.monotone_bracket
        assert res.bisection_width <= 1e-6
        # Hessian eigenvalues in Gamma_k at interior samples
        prof = res.profile
        r = prof.r[1:-1:64]
        du = prof.du[1:-1:64]
        ddu = np.gradient(prof.du, prof.r)[1:-1:64]
        for ri, dui, ddui in zip(r, du, ddu):
            lam = radial.radial_hessian_eigenvalues(dui, ddui, ri, 3)
            assert symfun.cone_classify(lam) >= 2

    def test_step_refinement_order(self):
        vals = {}
        for steps in (1024, 2048, 4096):
            vals[steps] = radial.shoot_eigen(2, 2, 0.0, 1.0, tol=1e-9,
                                             steps=steps).lambda1
        change_coarse = abs(vals[2048] - vals[1024])
        change_fine = abs(vals[4096] - vals[2048])
        assert change_coarse < 4.0 * max(change_fine, 1e-12) * 4.0 or \
            change_coarse < 1e-7
        # observed order >= 1: halving the step at least halves the change
        assert change_fine <= 0.75 * change_coarse or change_coarse < 1e-9

    def test_weighted_gradient_bounded_for_singular_weight(self):
        sups = []
        for steps in (2048, 4096):
            res = radial.shoot_eigen(3, 1, -0.6, 1.0, tol=1e-6, steps=steps)
            sups.append(float(np.max(res.profile.r * res.profile.du)))
        assert all(np.isfinite(sups))
        assert abs(sups[1] - sups[0]) < 0.05 * abs(sups[0])

    def test_non_integrable_weight_rejected(self):
        with pytest.raises(ParameterError):
            radial.shoot_eigen(2, 2, -0.5, 1.0)   # n + 2sk = 0

    def test_bad_params_rejected(self):
        with pytest.raises(ParameterError):
            radial.shoot_eigen(2, 3, 0.0, 1.0)
        with pytest.raises(ParameterError):
            radial.shoot_eigen(2, 1, 0.0, -1.0)
