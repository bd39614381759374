"""Dense linear-algebra kernels used by the estimators and simulators.

Factorisations are delegated to LAPACK through numpy/scipy. Everything here
adds input validation, a deterministic sign convention for eigen- and
singular vectors, and descending ordering.

Sign convention: every eigenvector / right singular vector is flipped so that
its largest-magnitude entry is positive (first such entry on ties). Quantities
built from these bases only depend on ``V_k V_k^T``, which is sign invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from lrps.exceptions import SingularDesignError

#: Symmetry / PSD tolerance, relative to the largest magnitude in the input.
SYM_TOL = 1e-10
#: Kronecker products larger than this many entries are refused.
MAX_KRON_ENTRIES = 2**27
#: Partial eigensolves are used when q >= SUBSET_RATIO * top and q >= SUBSET_MIN_DIM;
#: otherwise a full solve is faster.
SUBSET_RATIO = 10
SUBSET_MIN_DIM = 32


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive; returns (vectors, signs)."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs, signs


@dataclass(frozen=True)
class SymmetricEig:
    """Eigenvalues sorted descending with orthonormal eigenvectors as columns."""

    values: np.ndarray
    vectors: np.ndarray

    def leading(self, k):
        """First ``k`` eigenvectors, shape ``(q, k)``."""
        return self.vectors[:, :k]


@dataclass(frozen=True)
class TruncatedSvd:
    """Rank-``k`` SVD ``left @ diag(singulars) @ right.T``."""

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray

    def reconstruct(self):
        return (self.left * self.singulars) @ self.right.T


def sym_eig(m, psd=False, top=None, check=True):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrised as ``(m + m.T) / 2`` before factoring. Equal
    eigenvalues keep the backend's order, so the corresponding eigenvectors
    (and any projector cutting between them) are not unique.

    Parameters
    ----------
    m : array_like, shape (q, q)
        Symmetric matrix; asymmetry above ``SYM_TOL`` (relative) is an error.
    psd : bool
        If True, assert positive semi-definiteness: eigenvalues below
        ``-SYM_TOL`` (relative to the spectral radius) raise, smaller
        negative values are clamped to zero.
    top : int, optional
        Return only the leading ``top`` eigenpairs. When ``top`` is small
        relative to q they are computed with the LAPACK ``syevr`` subset
        driver, otherwise the full decomposition is truncated.
    check : bool
        If False, skip input validation and symmetrisation. For internal
        callers that pass a finite float64 matrix that is symmetric by construction.
    """
    if check:
        m = as_matrix(m)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"sym_eig needs a square matrix, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > SYM_TOL * scale:
            raise ValueError("sym_eig input is not symmetric")
        m = 0.5 * (m + m.T)
    q = m.shape[0]
    if top is not None and not 1 <= top:
        raise ValueError(f"top={top} must be positive")
    if top is not None and q >= max(SUBSET_MIN_DIM, top * SUBSET_RATIO):
        values, vectors = sla.eigh(m, subset_by_index=[q - top, q - 1], check_finite=False)
    else:
        values, vectors = np.linalg.eigh(m)
        if top is not None:
            values, vectors = values[q - min(top, q):], vectors[:, q - min(top, q):]
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors, _ = fix_signs(vectors[:, order])
    if psd:
        floor = -SYM_TOL * max(1.0, float(np.max(np.abs(values))))
        if values[-1] < floor:
            raise ValueError(f"matrix is not PSD: smallest eigenvalue {values[-1]:.3e}")
        values = np.where(values < 0.0, 0.0, values)
    return SymmetricEig(values=values, vectors=vectors)


def truncated_svd(m, k):
    """Best rank-``k`` Frobenius approximation of ``m`` (Eckart-Young)."""
    m = as_matrix(m)
    if not 1 <= k <= min(m.shape):
        raise ValueError(f"k={k} out of range 1..{min(m.shape)}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    right, signs = fix_signs(vt[:k].T)
    left = u[:, :k] * signs
    return TruncatedSvd(left=left, singulars=s[:k], right=right)


def spd_factor(a):
    """Cholesky factor of an SPD matrix in ``scipy.linalg.cho_solve`` form.

    Raises
    ------
    SingularDesignError
        If the factorisation fails or the factor is numerically singular.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    try:
        factor = sla.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError(
            "Cholesky factorisation failed: design is singular or ill-conditioned "
            "(n < p or collinear covariates)"
        ) from exc
    diag = np.abs(np.diag(factor[0]))
    if diag.min() ** 2 < a.shape[0] * np.finfo(float).eps * diag.max() ** 2:
        raise SingularDesignError(
            "design cross-product is numerically singular (collinear covariates)"
        )
    return factor


def spd_solve(a, b):
    """Solve ``a @ z = b`` for SPD ``a`` via Cholesky, never forming ``a^{-1}``."""
    factor = spd_factor(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor[0].shape[0]:
        raise ValueError(f"row mismatch: a is {factor[0].shape}, b has {b.shape[0]} rows")
    return sla.cho_solve(factor, b, check_finite=False)


def kron(a, b):
    """Kronecker product with a size guard."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    size = a.size * b.size
    if size > MAX_KRON_ENTRIES:
        raise ValueError(f"Kronecker product would have {size} entries (limit {MAX_KRON_ENTRIES})")
    return np.kron(a, b)


def toeplitz_cov(q, sigma2, rho):
    """Geometrically decaying Toeplitz covariance, entry ``sigma2 * rho**|i-j|``."""
    if int(q) != q or q < 1:
        raise ValueError(f"q must be a positive integer, got {q}")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    return sla.toeplitz(sigma2 * rho ** np.arange(int(q)))


def sample_gaussian_rows(n, cov, rng):
    """``n`` independent rows from ``N(0, cov)`` using the Cholesky factor of ``cov``."""
    cov = as_matrix(cov, "cov")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("covariance is not positive definite") from exc
    z = rng.standard_normal((int(n), cov.shape[0]))
    return z @ chol.T


def psd_sqrt(m):
    """Symmetric PSD square root ``V diag(sqrt(d)) V^T``."""
    eig = sym_eig(m, psd=True)
    return (eig.vectors * np.sqrt(eig.values)) @ eig.vectors.T


def numerical_rank(singulars, shape):
    """Rank from descending singular values, using the LAPACK-style cutoff."""
    singulars = np.asarray(singulars)
    if singulars.size == 0 or singulars[0] == 0.0:
        return 0
    tol = singulars[0] * max(shape) * np.finfo(float).eps
    return int(np.sum(singulars > tol))
