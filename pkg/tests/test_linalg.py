import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrps.exceptions import SingularDesignError
from lrps.linalg import (
    MAX_KRON_ENTRIES,
    as_matrix,
    fix_signs,
    kron,
    numerical_rank,
    psd_sqrt,
    sample_gaussian_rows,
    spd_factor,
    spd_solve,
    sym_eig,
    toeplitz_cov,
    truncated_svd,
)
from oracles import gauss_solve, jacobi_eig, projector


def random_sym(rng, q, psd=False):
    A = rng.standard_normal((q + 3 if psd else q, q))
    return A.T @ A if psd else A + A.T


class TestSymEig:
    def test_matches_jacobi_oracle(self):
        rng = np.random.default_rng(0)
        S = random_sym(rng, 7)
        eig = sym_eig(S)
        values, vectors = jacobi_eig(S)
        np.testing.assert_allclose(eig.values, values, atol=1e-12)
        for j in range(7):
            np.testing.assert_allclose(
                projector(eig.vectors[:, [j]]), projector(vectors[:, [j]]), atol=1e-10
            )

    def test_descending_orthonormal_and_reconstructs(self):
        rng = np.random.default_rng(1)
        S = random_sym(rng, 12)
        eig = sym_eig(S)
        assert np.all(np.diff(eig.values) <= 0)
        np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(12), atol=1e-12)
        np.testing.assert_allclose((eig.vectors * eig.values) @ eig.vectors.T, S, atol=1e-12)

    def test_sign_convention(self):
        rng = np.random.default_rng(2)
        vecs = sym_eig(random_sym(rng, 9)).vectors
        idx = np.argmax(np.abs(vecs), axis=0)
        assert np.all(vecs[idx, np.arange(9)] > 0)

    def test_identity_has_unit_spectrum(self):
        eig = sym_eig(np.eye(4))
        np.testing.assert_array_equal(eig.values, np.ones(4))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_psd_flag(self):
        with pytest.raises(ValueError, match="PSD"):
            sym_eig(np.diag([1.0, -1.0]), psd=True)
        clamped = sym_eig(np.diag([1.0, -1e-14]), psd=True)
        assert clamped.values[-1] == 0.0

    @pytest.mark.parametrize("q, top", [(40, 2), (10, 3), (5, 5)])
    def test_top_matches_full(self, q, top):
        rng = np.random.default_rng(q)
        S = random_sym(rng, q, psd=True)
        full = sym_eig(S, psd=True)
        part = sym_eig(S, psd=True, top=top)
        assert part.vectors.shape == (q, top)
        np.testing.assert_allclose(part.values, full.values[:top], rtol=1e-12)
        np.testing.assert_allclose(part.vectors, full.vectors[:, :top], atol=1e-9)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="NaN"):
            sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_fix_signs_flips_negative_columns():
    v = np.array([[0.1, -0.2], [-0.9, 0.1]])
    fixed, signs = fix_signs(v)
    np.testing.assert_array_equal(signs, [-1.0, -1.0])
    np.testing.assert_array_equal(fixed, -v)


class TestTruncatedSvd:
    def test_eckart_young(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((15, 8))
        s = np.linalg.svd(A, compute_uv=False)
        for k in range(1, 9):
            approx = truncated_svd(A, k).reconstruct()
            assert np.sum((A - approx) ** 2) == pytest.approx(np.sum(s[k:] ** 2), rel=1e-10, abs=1e-12)

    def test_exact_low_rank(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((10, 2)) @ rng.standard_normal((2, 6))
        np.testing.assert_allclose(truncated_svd(A, 2).reconstruct(), A, atol=1e-12)

    def test_k_range(self):
        with pytest.raises(ValueError):
            truncated_svd(np.ones((3, 2)), 3)


class TestSpd:
    def test_solve_matches_elimination(self):
        rng = np.random.default_rng(5)
        A = random_sym(rng, 6, psd=True)
        b = rng.standard_normal((6, 3))
        np.testing.assert_allclose(spd_solve(A, b), gauss_solve(A, b), rtol=1e-10, atol=1e-12)

    def test_singular_raises(self):
        x = np.arange(1.0, 6.0)
        X = np.column_stack([x, 2 * x])
        with pytest.raises(SingularDesignError):
            spd_factor(X.T @ X)

    def test_indefinite_raises(self):
        with pytest.raises(SingularDesignError):
            spd_factor(np.diag([1.0, -1.0]))

    def test_singular_error_is_linalg_error(self):
        assert issubclass(SingularDesignError, np.linalg.LinAlgError)


def test_kron_layout_and_guard():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    K = kron(a, b)
    for i in range(2):
        for j in range(2):
            np.testing.assert_array_equal(K[2 * i : 2 * i + 2, 2 * j : 2 * j + 2], a[i, j] * b)
    side = int(np.sqrt(MAX_KRON_ENTRIES)) // 64 + 1
    with pytest.raises(ValueError, match="entries"):
        kron(np.ones((64, 64)), np.ones((side, side)))


def test_toeplitz_entries():
    T = toeplitz_cov(5, 2.0, 0.5)
    i, j = np.indices((5, 5))
    np.testing.assert_allclose(T, 2.0 * 0.5 ** np.abs(i - j))
    np.testing.assert_array_equal(toeplitz_cov(3, 1.0, 0.0), np.eye(3))
    with pytest.raises(ValueError):
        toeplitz_cov(3, 1.0, 1.0)


def test_sample_gaussian_rows_covariance():
    cov = toeplitz_cov(3, 1.5, 0.6)
    Z = sample_gaussian_rows(200_000, cov, np.random.default_rng(6))
    np.testing.assert_allclose(np.cov(Z, rowvar=False), cov, atol=0.02)


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(7)
    S = random_sym(rng, 5, psd=True)
    R = psd_sqrt(S)
    np.testing.assert_allclose(R @ R, S, atol=1e-10)
    np.testing.assert_allclose(R, R.T)


def test_numerical_rank():
    assert numerical_rank([3.0, 1.0, 1e-20], (3, 3)) == 2
    assert numerical_rank([0.0, 0.0], (2, 2)) == 0
    assert numerical_rank([], (0, 0)) == 0


def test_as_matrix_validation():
    with pytest.raises(ValueError, match="2-D"):
        as_matrix(np.ones(3), "v")
    with pytest.raises(ValueError, match="Inf"):
        as_matrix([[np.inf]])


@settings(max_examples=40, deadline=None)
@given(q=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_sym_eig_property(q, seed):
    S = random_sym(np.random.default_rng(seed), q, psd=True)
    eig = sym_eig(S, psd=True)
    scale = max(1.0, np.abs(S).max())
    assert np.all(eig.values >= 0)
    np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(q), atol=1e-10)
    np.testing.assert_allclose((eig.vectors * eig.values) @ eig.vectors.T, S, atol=1e-10 * scale)
