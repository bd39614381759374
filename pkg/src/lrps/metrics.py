"""Error measures and the large-sample bias/variance approximation for LRPS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lrps.estimators import Smoother
from lrps.linalg import as_matrix, psd_sqrt, spd_solve, sym_eig


def _same_shape(a, b, what):
    a = as_matrix(a, what[0])
    b = as_matrix(b, what[1])
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {what[0]} {a.shape} vs {what[1]} {b.shape}")
    return a, b


def estimation_mse(B_hat, B_true):
    """Squared Frobenius estimation error ``||B_hat - B_true||_F^2`` for one draw."""
    B_hat, B_true = _same_shape(B_hat, B_true, ("B_hat", "B_true"))
    return float(np.sum((B_hat - B_true) ** 2))


def mspe(Y_test, Y_pred):
    """Mean-square prediction error ``||Y_pred - Y_test||_F^2 / (q * n_test)``."""
    Y_test, Y_pred = _same_shape(Y_test, Y_pred, ("Y_test", "Y_pred"))
    return float(np.sum((Y_pred - Y_test) ** 2) / Y_test.size)


def _projector(W_k):
    if isinstance(W_k, Smoother):
        return W_k.projector
    return as_matrix(W_k, "W_k")


def theoretical_bias_variance(B_true, S_X, Sigma_e, W_k, n):
    """Large-sample LRPS variance and squared bias for a given projector.

    ``variance = Tr(S_X^{-1}) / n * Tr(W_k Sigma_e)`` and
    ``bias2 = Tr((I - W_k) B^T B)``.

    ``W_k`` may be a :class:`Smoother` or an explicit q x q projector. Pass the
    empirical projector for the plug-in approximation or the population one
    for a fixed-design reference; the formula is the same.
    """
    B_true = as_matrix(B_true, "B_true")
    S_X = as_matrix(S_X, "S_X")
    Sigma_e = as_matrix(Sigma_e, "Sigma_e")
    W = _projector(W_k)
    p, q = B_true.shape
    if S_X.shape != (p, p) or Sigma_e.shape != (q, q) or W.shape != (q, q):
        raise ValueError("inconsistent dimensions among B_true, S_X, Sigma_e, W_k")
    alpha = float(np.trace(spd_solve(S_X, np.eye(p))))
    variance = alpha / n * float(np.trace(W @ Sigma_e))
    bias2 = float(np.trace((np.eye(q) - W) @ (B_true.T @ B_true)))
    return variance, bias2


@dataclass(frozen=True)
class BiasVarianceCurve:
    """Rows of ``(k, variance, bias2, mse)`` for k = 1..q."""

    per_k: list

    @property
    def ks(self):
        return [row[0] for row in self.per_k]

    @property
    def mse(self):
        return np.array([row[3] for row in self.per_k])


def bias_variance_curve(B_true, S_X, Sigma_e, basis, n):
    """Evaluate :func:`theoretical_bias_variance` for the nested projectors of ``basis``.

    ``basis`` is an ordered q x q orthonormal matrix; ``W_k`` uses its first k columns.
    """
    basis = as_matrix(basis, "basis")
    rows = []
    for k in range(1, basis.shape[1] + 1):
        var, bias2 = theoretical_bias_variance(B_true, S_X, Sigma_e, Smoother(basis[:, :k]), n)
        rows.append((k, var, bias2, var + bias2))
    return BiasVarianceCurve(rows)


def variance_reduction_ratio(Sigma_e, V_k):
    """``||Sigma_e^{1/2} V_k||_F^2 / ||Sigma_e^{1/2}||_F^2``, the LRPS/OLS variance ratio."""
    root = psd_sqrt(Sigma_e)
    V_k = as_matrix(V_k, "V_k")
    if V_k.shape[0] != root.shape[0]:
        raise ValueError(f"V_k has {V_k.shape[0]} rows, Sigma_e is {root.shape}")
    return float(np.sum((root @ V_k) ** 2) / np.sum(root**2))


def variance_reduction_bound(Sigma_e, k):
    """Upper bound on :func:`variance_reduction_ratio` over all rank-k bases."""
    # gamma_i^2(Sigma_e^{1/2}) are the eigenvalues of Sigma_e.
    values = sym_eig(Sigma_e, psd=True).values
    return float(np.sum(values[:k]) / np.sum(values))


def snr(X, B, Sigma_e):
    """Signal-to-noise ratio ``||X B||_F / ||Sigma_e||_F``."""
    X = as_matrix(X, "X")
    B = as_matrix(B, "B")
    Sigma_e = as_matrix(Sigma_e, "Sigma_e")
    if X.shape[1] != B.shape[0] or Sigma_e.shape != (B.shape[1], B.shape[1]):
        raise ValueError("inconsistent dimensions among X, B, Sigma_e")
    return float(np.linalg.norm(X @ B) / np.linalg.norm(Sigma_e))
