"""OLS, low-rank pre-smoothing (LRPS) and reduced-rank regression (RRR).

All three share the OLS solve ``B_hat = S_X^{-1} S_XY`` with
``S_X = X^T X / n`` and ``S_XY = X^T Y / n``; they differ in the rank-k
orthogonal projector applied on the outcome side:

* LRPS uses the leading eigenvectors of ``S_Y = Y^T Y / n``.
* RRR uses the leading eigenvectors of ``B_hat^T S_X B_hat``.

``S_X`` is only ever touched through its Cholesky factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from lrps.exceptions import SingularDesignError
from lrps.linalg import as_matrix, fix_signs, numerical_rank, spd_factor, sym_eig

METHODS = ("OLS", "LRPS", "RRR")


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RegressionData:
    """Design ``X`` (n x p) paired with outcomes ``Y`` (n x q)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if X.shape[0] < 2:
            raise ValueError("need at least two observations")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]

    @cached_property
    def design_factor(self):
        """Cholesky factor of ``S_X``."""
        if self.n < self.p:
            raise SingularDesignError(f"n={self.n} < p={self.p}: S_X is singular")
        return spd_factor(self.X.T @ self.X / self.n)

    @cached_property
    def S_XY(self):
        return self.X.T @ self.Y / self.n

    def rows(self, index):
        return RegressionData(self.X[index], self.Y[index])


@dataclass(frozen=True)
class FittedModel:
    """A fitted coefficient matrix.

    ``basis`` is the q x k orthonormal outcome basis (LRPS: leading
    eigenvectors of ``S_Y``; RRR: of ``B_hat^T S_X B_hat``). ``rank_warning`` is
    set when LRPS was asked for more directions than ``S_Y`` has numerical
    rank, in which case the trailing basis vectors are arbitrary.
    """

    B_hat: np.ndarray
    method: str
    k: Optional[int] = None
    basis: Optional[np.ndarray] = None
    rank_warning: bool = False

    def predict(self, X_new):
        return predict(self, X_new)


@dataclass(frozen=True)
class Smoother:
    """Rank-k orthogonal projector ``W_k = basis @ basis.T`` on the outcome space."""

    basis: np.ndarray

    @property
    def k(self):
        return self.basis.shape[1]

    @cached_property
    def projector(self):
        return self.basis @ self.basis.T

    def apply(self, Y):
        return (np.asarray(Y) @ self.basis) @ self.basis.T


def _check_k(k, upper, what):
    if int(k) != k or not 1 <= k <= upper:
        raise ValueError(f"k={k} out of range 1..{upper} for {what}")
    return int(k)


@dataclass(frozen=True)
class _OutcomeBasis:
    vectors: np.ndarray  # q x k
    singulars: np.ndarray  # the k leading singular values of Y, so ||Y v_j|| = singulars[j]
    rank: int  # numerical rank of S_Y, capped at k


def outcome_basis(Y, k):
    """Leading ``k`` eigenvectors of ``S_Y = Y^T Y / n`` and the rank of ``S_Y``.

    For n >= q this is the eigendecomposition of the q x q matrix ``S_Y``.
    For n < q the thin SVD of ``Y`` is used instead (its right singular
    vectors are the same eigenvectors), costing O(n^2 q) rather than O(q^3).
    Requests beyond ``min(n, q)`` fall back to the q x q problem. Only the
    leading ``k`` eigenpairs are computed.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n, q = Y.shape
    if n < q and k <= n:
        _, s, vt = np.linalg.svd(Y, full_matrices=False)
        vectors, _ = fix_signs(vt[:k].T)
        return _OutcomeBasis(vectors, s[:k], numerical_rank(s, Y.shape))
    # Y^T Y has the eigenvectors of S_Y; the 1/n scale cannot change them or the rank.
    eig = sym_eig(Y.T @ Y, psd=True, top=k, check=False)
    return _OutcomeBasis(eig.vectors, np.sqrt(eig.values), numerical_rank(eig.values, (q, q)))


def ols_fit(data):
    """Ordinary least squares ``B_hat = S_X^{-1} S_XY``."""
    B_hat = sla.cho_solve(data.design_factor, data.S_XY, check_finite=False)
    return FittedModel(B_hat=B_hat, method="OLS")


def _lrps_coefficients(data, V, d, order):
    # Y V_k = U_k D_k with D_k the singular values; the p x k latent problem is
    # solved first. X^T U_k is formed as (X^T Y V_k) D_k^{-1} so only a p x k
    # block is rescaled.
    d = np.where(d > 0, d, 1.0)
    XtU = (data.X.T @ (data.Y @ V)) / d
    G = sla.cho_solve(data.design_factor, XtU / data.n, check_finite=False)
    if order == "p>q":
        return G @ (d[:, None] * V.T)
    return (G * d) @ V.T


def lrps_fit(data, k, order="auto"):
    """Low-rank pre-smoothing estimator ``S_X^{-1} S_XY V_k V_k^T``.

    Parameters
    ----------
    data : RegressionData
    k : int
        Number of leading outcome eigenvectors, ``1 <= k <= q``.
    order : {"auto", "p>q", "q>p"}
        Multiplication order of the latent-space computation. "auto" picks
        "p>q" when p > q and "q>p" otherwise; both give the same matrix.
    """
    k = _check_k(k, data.q, "LRPS")
    if order == "auto":
        order = "p>q" if data.p > data.q else "q>p"
    elif order not in ("p>q", "q>p"):
        raise ValueError(f"unknown order {order!r}")
    data.design_factor  # raises on a singular design before any other work
    basis = outcome_basis(data.Y, k)
    if basis.rank == 0:
        B = np.zeros((data.p, data.q))
    else:
        B = _lrps_coefficients(data, basis.vectors, basis.singulars, order)
    return FittedModel(
        B_hat=B, method="LRPS", k=k, basis=basis.vectors, rank_warning=k > basis.rank
    )


def _rrr_eig(data, B_ols, k):
    # B^T S_X B = B^T S_XY since S_X B = S_XY.
    M = B_ols.T @ data.S_XY
    return sym_eig(0.5 * (M + M.T), psd=True, top=k, check=False)


def rrr_fit(data, k):
    """Reduced-rank regression ``B_hat U_k U_k^T`` with ``U_k`` from ``B_hat^T S_X B_hat``."""
    k = _check_k(k, min(data.p, data.q), "RRR")
    B_ols = ols_fit(data).B_hat
    U = _rrr_eig(data, B_ols, k).vectors
    return FittedModel(B_hat=(B_ols @ U) @ U.T, method="RRR", k=k, basis=U)


def lrps_path(data, ks: Sequence[int]):
    """LRPS fits for several ranks sharing one OLS solve and one eigenbasis."""
    ks = [_check_k(k, data.q, "LRPS") for k in ks]
    if not ks:
        return []
    basis = outcome_basis(data.Y, max(ks))
    C = ols_fit(data).B_hat @ basis.vectors
    V = basis.vectors
    return [
        FittedModel(
            B_hat=C[:, :k] @ V[:, :k].T,
            method="LRPS",
            k=k,
            basis=V[:, :k],
            rank_warning=k > basis.rank,
        )
        for k in ks
    ]


def rrr_path(data, ks: Sequence[int]):
    """RRR fits for several ranks sharing one OLS solve and one eigenbasis."""
    ks = [_check_k(k, min(data.p, data.q), "RRR") for k in ks]
    if not ks:
        return []
    B_ols = ols_fit(data).B_hat
    U = _rrr_eig(data, B_ols, max(ks)).vectors
    C = B_ols @ U
    return [
        FittedModel(B_hat=C[:, :k] @ U[:, :k].T, method="RRR", k=k, basis=U[:, :k])
        for k in ks
    ]


def fit(data, method, k=None):
    """Dispatch on method name; ``k`` is ignored for OLS."""
    method = method.upper()
    if method == "OLS":
        return ols_fit(data)
    if method == "LRPS":
        return lrps_fit(data, k)
    if method == "RRR":
        return rrr_fit(data, k)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def predict(model, X_new):
    """Fitted values ``X_new @ B_hat``."""
    X_new = as_matrix(X_new, "X_new")
    if X_new.shape[1] != model.B_hat.shape[0]:
        raise ValueError(
            f"X_new has {X_new.shape[1]} columns but the model has p={model.B_hat.shape[0]}"
        )
    return X_new @ model.B_hat


def presmooth(Y, k):
    """Project ``Y`` onto its leading ``k`` eigen-directions.

    Returns the pre-smoothed outcomes ``Y W_k`` (the best rank-k Frobenius
    approximation of ``Y``) and the :class:`Smoother`.
    """
    Y = as_matrix(Y, "Y")
    k = _check_k(k, Y.shape[1], "presmooth")
    smoother = Smoother(outcome_basis(Y, k).vectors)
    return smoother.apply(Y), smoother
