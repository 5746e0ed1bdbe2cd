"""Tests for the symmetric-function kernel.

The brute-force oracle here enumerates index subsets directly; it stays
independent of the O(nk) recursion it checks.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hesseig import symfun as sf
from hesseig.errors import ConeError, DualConeError, ParameterError


def sigma_bruteforce(values, k):
    """Subset-enumeration oracle, valid for small n."""
    total = 0.0
    for idx in itertools.combinations(range(len(values)), k):
        prod = 1.0
        for i in idx:
            prod *= values[i]
        total += prod
    return total


def sample_in_cone(rng, n, k, margin=1e-6):
    """Random vector in Gamma_k: shift a Gaussian draw along (1,...,1)."""
    x = rng.standard_normal(n)
    lo, hi = 0.0, 1.0
    while sf.cone_classify(x + hi) < k or min(
            sf.sigma(x + hi, j) for j in range(1, k + 1)) <= margin:
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError("cone shift failed")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        shifted = x + mid
        if sf.cone_classify(shifted) >= k and min(
                sf.sigma(shifted, j) for j in range(1, k + 1)) > margin:
            hi = mid
        else:
            lo = mid
    return x + hi


class TestSigma:
    def test_spec_examples(self):
        assert sf.sigma([1, 1, 1], 2) == 3
        assert sf.sigma([1, 2, 3], 2) == 11
        assert sf.sigma([3, -1, 2, 5], 3) == -1

    def test_out_of_range_k(self):
        with pytest.raises(ParameterError):
            sf.sigma([1.0, 2.0], 3)
        with pytest.raises(ParameterError):
            sf.sigma([1.0, 2.0], 0)

    def test_integer_exactness_matches_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = rng.integers(1, 9)
            vals = rng.integers(-9, 10, size=n).astype(float)
            for k in range(1, n + 1):
                assert sf.sigma(vals, k) == sigma_bruteforce(vals, k)

    @given(st.lists(st.floats(min_value=-10, max_value=10), min_size=1, max_size=8),
           st.integers(min_value=1, max_value=8))
    def test_matches_enumeration_floats(self, vals, k):
        if k > len(vals):
            k = len(vals)
        got = sf.sigma(vals, k)
        want = sigma_bruteforce(vals, k)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


class TestSigmaPartial:
    def test_spec_examples(self):
        # spec indices are 1-based; this API is 0-based
        assert sf.sigma_partial([1, 2, 3], 1, 0) == 5
        assert sf.sigma_partial([1, 1, 1], 2, 2) == 1

    def test_bruteforce_pairs_excluding_index(self):
        vals = [2.0, 5.0, -1.0, 4.0]
        want = sigma_bruteforce([2.0, -1.0, 4.0], 2)
        assert sf.sigma_partial(vals, 2, 1) == pytest.approx(want, rel=1e-14)

    @given(st.lists(st.floats(min_value=-5, max_value=5), min_size=2, max_size=8),
           st.integers(min_value=0, max_value=7))
    def test_deletion_identity(self, vals, i):
        i = i % len(vals)
        n = len(vals)
        for k in range(1, n):
            lhs = sf.sigma(vals, k)
            rhs = sf.sigma_partial(vals, k, i) + vals[i] * sf.sigma_partial(vals, k - 1, i)
            assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-11)


class TestConeClassify:
    def test_spec_examples(self):
        assert sf.cone_classify([1, 1, 1]) == 3
        assert sf.cone_classify([2, 2, -1]) == 1   # sigma_2 = 0 exactly
        assert sf.cone_classify([1, 1, -0.4]) == 2

    def test_nestedness(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            lam = sample_in_cone(rng, 4, 2)
            k_max = sf.cone_classify(lam)
            for j in range(1, k_max + 1):
                assert sf.in_cone(lam, j)


class TestHessianSk:
    def test_spec_examples(self):
        assert sf.hessian_sk(np.eye(3), 2) == pytest.approx(3.0, rel=1e-12)
        assert sf.hessian_sk(np.diag([1.0, 2.0, 3.0]), 3) == pytest.approx(6.0, rel=1e-12)
        assert sf.hessian_sk([[2.0, 1.0], [1.0, 2.0]], 2) == pytest.approx(3.0, rel=1e-12)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            d = rng.uniform(0.5, 3.0, size=3)
            q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            h = q @ np.diag(d) @ q.T
            for k in (1, 2, 3):
                assert sf.hessian_sk(h, k) == pytest.approx(
                    sigma_bruteforce(d, k), rel=1e-10)


class TestLinearizedCoeffs:
    def test_k1_is_identity(self):
        rng = np.random.default_rng(5)
        h = rng.standard_normal((4, 4))
        h = h + h.T + 8 * np.eye(4)
        assert np.allclose(sf.linearized_coeffs(h, 1), np.eye(4), atol=1e-12)

    def test_k2_n2_is_cofactor(self):
        a, b, c = 3.0, 0.7, 2.0
        got = sf.linearized_coeffs(np.array([[a, b], [b, c]]), 2)
        want = np.array([[c, -b], [-b, a]])
        assert np.allclose(got, want, atol=1e-12)

    def test_diagonal_example(self):
        got = sf.linearized_coeffs(np.diag([1.0, 2.0, 3.0]), 2)
        assert np.allclose(got, np.diag([5.0, 4.0, 3.0]), atol=1e-12)

    def test_rejects_non_admissible(self):
        with pytest.raises(ConeError):
            sf.linearized_coeffs(np.diag([1.0, -2.0]), 2)

    def test_positive_definite_on_cone(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            n = int(rng.integers(2, 6))
            k = int(rng.integers(1, n + 1))
            lam = sample_in_cone(rng, n, k)
            q, _ = np.linalg.qr(rng.standard_normal((n, n)))
            h = q @ np.diag(lam) @ q.T
            coeffs = sf.linearized_coeffs(h, k)
            assert np.all(np.linalg.eigvalsh(coeffs) > 0)


class TestRhoK:
    def test_ones_is_one(self):
        assert sf.rho_k([1, 1, 1], 2) == pytest.approx(1.0, rel=1e-14)

    def test_homogeneity(self):
        for c in (0.3, 2.0, 7.5):
            assert sf.rho_k([c] * 4, 3) == pytest.approx(c, rel=1e-12)

    def test_value(self):
        assert sf.rho_k([1, 2, 3], 2) == pytest.approx(math.sqrt(11 / 3), rel=1e-13)

    def test_cone_error(self):
        with pytest.raises(ConeError):
            sf.rho_k([1.0, -1.0], 2)


class TestRhoKStar:
    def test_identity(self):
        for n, k in [(2, 1), (2, 2), (3, 2), (4, 3)]:
            assert sf.rho_k_star(np.eye(n), k) == pytest.approx(1.0, rel=1e-7)

    def test_homogeneity(self):
        assert sf.rho_k_star(3.0 * np.eye(3), 2) == pytest.approx(3.0, rel=1e-7)

    def test_k_equals_n_is_det_root(self):
        # independent grid-search oracle on xi_1 * xi_2 = 1
        a = np.array([2.0, 1.0])
        xi1 = np.linspace(0.05, 4.0, 20001)
        oracle = np.min((a[0] * xi1 + a[1] / xi1) / 2.0)
        got = sf.rho_k_star(np.diag(a), 2)
        assert got == pytest.approx(math.sqrt(2.0), rel=1e-6)
        assert got == pytest.approx(oracle, rel=1e-6)

    def test_general_matrix_k_n(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            d = rng.uniform(0.4, 3.0, size=2)
            q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
            mat = q @ np.diag(d) @ q.T
            assert sf.rho_k_star(mat, 2) == pytest.approx(
                math.sqrt(d[0] * d[1]), rel=1e-6)

    def test_dual_cone_violation(self):
        with pytest.raises(DualConeError):
            sf.rho_k_star(np.diag([1.0, -5.0]), 1)


class TestProposition21Style:
    """Randomized checks of the sigma_k inequality suite."""

    def setup_method(self):
        self.rng = np.random.default_rng(2024)

    def test_row_sum_identity(self):
        for _ in range(300):
            n = int(self.rng.integers(2, 7))
            k = int(self.rng.integers(2, n + 1))
            lam = self.rng.standard_normal(n) * 3
            lhs = sum(sf.sigma_partial(lam, k - 1, i) for i in range(n))
            rhs = (n - k + 1) * sf.sigma(lam, k - 1)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_partial_ordering_in_cone(self):
        for _ in range(200):
            n = int(self.rng.integers(2, 7))
            k = int(self.rng.integers(2, n + 1))
            lam = np.sort(sample_in_cone(self.rng, n, k))[::-1]
            parts = [sf.sigma_partial(lam, k - 1, i) for i in range(n)]
            assert parts[0] > 0
            assert all(parts[i + 1] >= parts[i] - 1e-12 * abs(parts[i])
                       for i in range(n - 1))

    def test_maclaurin(self):
        for _ in range(300):
            n = int(self.rng.integers(2, 7))
            k = int(self.rng.integers(2, n + 1))
            lam = sample_in_cone(self.rng, n, k)
            lhs = (sf.sigma(lam, k - 1) / math.comb(n, k - 1)) ** (1.0 / (k - 1))
            rhs = (sf.sigma(lam, k) / math.comb(n, k)) ** (1.0 / k)
            assert lhs >= rhs * (1 - 1e-12)

    def test_garding(self):
        for _ in range(300):
            n = int(self.rng.integers(2, 7))
            k = int(self.rng.integers(1, n + 1))
            lam = sample_in_cone(self.rng, n, k)
            mu = sample_in_cone(self.rng, n, k)
            lhs = sum(mu[i] * sf.sigma_partial(lam, k - 1, i) for i in range(n))
            rhs = k * sf.sigma(lam, k) ** ((k - 1) / k) * sf.sigma(mu, k) ** (1.0 / k)
            assert lhs >= rhs * (1 - 1e-12)

    def test_concavity_of_kth_root(self):
        for _ in range(300):
            n = int(self.rng.integers(2, 7))
            k = int(self.rng.integers(1, n + 1))
            lam = sample_in_cone(self.rng, n, k)
            mu = sample_in_cone(self.rng, n, k)
            t = self.rng.uniform()
            mix = t * lam + (1 - t) * mu
            lhs = sf.sigma(mix, k) ** (1.0 / k)
            rhs = t * sf.sigma(lam, k) ** (1.0 / k) + (1 - t) * sf.sigma(mu, k) ** (1.0 / k)
            assert lhs >= rhs - 1e-12

    def test_product_lower_bound_stays_positive(self):
        ratios = []
        for _ in range(200):
            n, k = 4, int(self.rng.integers(2, 5))
            lam = sample_in_cone(self.rng, n, k)
            prod = math.prod(sf.sigma_partial(lam, k - 1, i) for i in range(n))
            ratios.append(prod / sf.sigma(lam, k) ** (n * (k - 1) / k))
        assert min(ratios) > 0

    def test_det_f_derivative_lower_bound(self):
        mins = []
        for _ in range(100):
            n = int(self.rng.integers(2, 5))
            k = int(self.rng.integers(1, n + 1))
            lam = sample_in_cone(self.rng, n, k)
            q, _ = np.linalg.qr(self.rng.standard_normal((n, n)))
            h = q @ np.diag(lam) @ q.T
            det = np.linalg.det(sf.f_derivative_coeffs(h, k))
            mins.append(det ** (1.0 / n))
        assert min(mins) > 0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=2, max_value=6), st.data())
    def test_rho_star_lower_bound_on_f_matrix(self, n, data):
        k = data.draw(st.integers(min_value=1, max_value=n))
        seed = data.draw(st.integers(min_value=0, max_value=2 ** 31))
        rng = np.random.default_rng(seed)
        lam = sample_in_cone(rng, n, k)
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        h = q @ np.diag(lam) @ q.T
        bound = math.comb(n, k) ** (1.0 / k) / n
        got = sf.rho_k_star(sf.f_derivative_coeffs(h, k), k, tol=1e-8)
        assert got >= bound * (1 - 1e-5)
