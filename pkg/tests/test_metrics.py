import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrps.estimators import Smoother
from lrps.linalg import toeplitz_cov
from lrps.metrics import (
    bias_variance_curve,
    estimation_mse,
    mspe,
    snr,
    theoretical_bias_variance,
    variance_reduction_bound,
    variance_reduction_ratio,
)
from oracles import gauss_solve, jacobi_eig


def random_orthonormal(rng, q, k):
    return np.linalg.qr(rng.standard_normal((q, k)))[0]


class TestEstimationMse:
    def test_zero(self):
        B = np.arange(6.0).reshape(2, 3)
        assert estimation_mse(B, B) == 0.0

    def test_single_entry(self):
        B = np.zeros((2, 3))
        E = B.copy()
        E[1, 2] = 2.0
        assert estimation_mse(B + E, B) == 4.0

    def test_direct_summation(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((2, 4, 3))
        expected = sum((a[i, j] - b[i, j]) ** 2 for i in range(4) for j in range(3))
        assert estimation_mse(a, b) == pytest.approx(expected, rel=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            estimation_mse(np.zeros((2, 2)), np.zeros((2, 3)))


class TestMspe:
    def test_perfect(self):
        Y = np.ones((3, 2))
        assert mspe(Y, Y) == 0.0

    def test_unit_residuals(self):
        assert mspe(np.zeros((5, 4)), np.ones((5, 4))) == 1.0

    def test_direct_summation(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal((2, 7, 3))
        expected = sum((a[i, j] - b[i, j]) ** 2 for i in range(7) for j in range(3)) / 21
        assert mspe(a, b) == pytest.approx(expected, rel=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mspe(np.zeros((2, 2)), np.zeros((3, 2)))


class TestTheoreticalBiasVariance:
    def test_full_rank_identity_case(self):
        p, q, n = 3, 4, 50
        B = np.random.default_rng(2).standard_normal((p, q))
        var, bias2 = theoretical_bias_variance(B, np.eye(p), np.eye(q), np.eye(q), n)
        assert var == pytest.approx(p * q / n, rel=1e-14)
        assert bias2 == pytest.approx(0.0, abs=1e-12)

    def test_zero_projector(self):
        B = np.random.default_rng(3).standard_normal((2, 3))
        var, bias2 = theoretical_bias_variance(B, np.eye(2), np.eye(3), np.zeros((3, 3)), 10)
        assert var == 0.0
        assert bias2 == pytest.approx(np.sum(B**2), rel=1e-14)

    def test_against_explicit_formula(self):
        rng = np.random.default_rng(4)
        p, q, n = 4, 5, 200
        B = rng.standard_normal((p, q))
        A = rng.standard_normal((30, p))
        S_X = A.T @ A / 30
        Sigma = toeplitz_cov(q, 1.3, 0.4)
        V = random_orthonormal(rng, q, 2)
        W = V @ V.T
        alpha = np.trace(gauss_solve(S_X, np.eye(p)))
        var, bias2 = theoretical_bias_variance(B, S_X, Sigma, Smoother(V), n)
        assert var == pytest.approx(alpha / n * np.trace(W @ Sigma), rel=1e-12)
        assert bias2 == pytest.approx(np.trace((np.eye(q) - W) @ B.T @ B), rel=1e-12)

    def test_dimension_check(self):
        with pytest.raises(ValueError, match="inconsistent"):
            theoretical_bias_variance(np.ones((2, 3)), np.eye(2), np.eye(2), np.eye(3), 5)


class TestBiasVarianceCurve:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.p, self.q, self.n = 3, 6, 100
        self.B = rng.standard_normal((self.p, self.q))
        A = rng.standard_normal((20, self.p))
        self.S_X = A.T @ A / 20
        self.Sigma = toeplitz_cov(self.q, 1.0, 0.6)
        self.basis = random_orthonormal(rng, self.q, self.q)
        self.curve = bias_variance_curve(self.B, self.S_X, self.Sigma, self.basis, self.n)

    def test_monotone(self):
        var = np.array([r[1] for r in self.curve.per_k])
        bias2 = np.array([r[2] for r in self.curve.per_k])
        assert np.all(np.diff(var) >= -1e-12)
        assert np.all(np.diff(bias2) <= 1e-12)
        assert self.curve.ks == list(range(1, self.q + 1))
        np.testing.assert_allclose(self.curve.mse, var + bias2)

    def test_full_rank_recovers_ols(self):
        k, var, bias2, total = self.curve.per_k[-1]
        ols = np.trace(np.linalg.inv(self.S_X)) * np.trace(self.Sigma) / self.n
        assert abs(bias2) <= 1e-10
        assert total == pytest.approx(ols, rel=1e-12)


class TestVarianceReduction:
    def test_isotropic_is_k_over_q(self):
        rng = np.random.default_rng(6)
        for q in (3, 7, 12):
            for k in range(1, q + 1):
                ratio = variance_reduction_ratio(2.5 * np.eye(q), random_orthonormal(rng, q, k))
                assert abs(ratio - k / q) <= 1e-12

    def test_full_basis_is_one(self):
        rng = np.random.default_rng(7)
        Sigma = toeplitz_cov(5, 1.0, 0.7)
        assert variance_reduction_ratio(Sigma, random_orthonormal(rng, 5, 5)) == pytest.approx(1.0, abs=1e-12)

    def test_toeplitz_top_eigenvectors(self):
        Sigma = toeplitz_cov(5, 1.0, 0.9)
        values, vectors = jacobi_eig(Sigma)
        ratio = variance_reduction_ratio(Sigma, vectors[:, :2])
        assert ratio == pytest.approx((values[0] + values[1]) / np.trace(Sigma), rel=1e-10)
        assert variance_reduction_bound(Sigma, 2) == pytest.approx(ratio, rel=1e-10)

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError):
            variance_reduction_ratio(np.diag([1.0, -1.0]), np.eye(2)[:, :1])


class TestSnr:
    def test_zero_signal(self):
        assert snr(np.ones((4, 2)), np.zeros((2, 3)), np.eye(3)) == 0.0

    def test_identity_case(self):
        assert snr(np.eye(4), np.eye(4), np.eye(4)) == pytest.approx(1.0)

    def test_direct(self):
        rng = np.random.default_rng(8)
        X, B = rng.standard_normal((10, 3)), rng.standard_normal((3, 4))
        Sigma = toeplitz_cov(4, 2.0, 0.3)
        expected = np.sqrt(np.sum((X @ B) ** 2)) / np.sqrt(np.sum(Sigma**2))
        assert snr(X, B, Sigma) == pytest.approx(expected, rel=1e-14)

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            snr(np.ones((4, 2)), np.ones((3, 3)), np.eye(3))


@settings(max_examples=100, deadline=None)
@given(q=st.integers(1, 10), data=st.data())
def test_variance_reduction_bound_holds(q, data):
    k = data.draw(st.integers(1, q))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    A = rng.standard_normal((q, q))
    Sigma = A @ A.T + 1e-3 * np.eye(q)
    ratio = variance_reduction_ratio(Sigma, random_orthonormal(rng, q, k))
    assert 0.0 <= ratio <= 1.0 + 1e-12
    assert ratio <= variance_reduction_bound(Sigma, k) + 1e-12
