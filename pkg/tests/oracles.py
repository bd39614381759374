"""Slow reference implementations that share no code with the package.

Only plain Python loops over numpy scalars are used: Gaussian elimination
with partial pivoting for linear systems and the cyclic Jacobi method for
symmetric eigenproblems.
"""

from __future__ import annotations

import math

import numpy as np


def gauss_solve(A, B):
    """Solve ``A Z = B`` by Gaussian elimination with partial pivoting."""
    A = [list(map(float, row)) for row in np.asarray(A)]
    B = np.asarray(B, dtype=float)
    vec = B.ndim == 1
    Bm = [list(map(float, row)) for row in (B[:, None] if vec else B)]
    n = len(A)
    m = len(Bm[0])
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col]))
        if A[piv][col] == 0.0:
            raise ZeroDivisionError("singular system")
        A[col], A[piv] = A[piv], A[col]
        Bm[col], Bm[piv] = Bm[piv], Bm[col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            if f == 0.0:
                continue
            for c in range(col, n):
                A[r][c] -= f * A[col][c]
            for c in range(m):
                Bm[r][c] -= f * Bm[col][c]
    Z = [[0.0] * m for _ in range(n)]
    for r in range(n - 1, -1, -1):
        for c in range(m):
            s = Bm[r][c] - sum(A[r][j] * Z[j][c] for j in range(r + 1, n))
            Z[r][c] = s / A[r][r]
    Z = np.array(Z)
    return Z[:, 0] if vec else Z


def ols_oracle(X, Y):
    """Normal equations ``(X^T X) B = X^T Y`` solved by elimination."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    q = Y.shape[1]
    XtX = [[sum(X[i, a] * X[i, b] for i in range(n)) for b in range(p)] for a in range(p)]
    XtY = [[sum(X[i, a] * Y[i, c] for i in range(n)) for c in range(q)] for a in range(p)]
    return gauss_solve(np.array(XtX), np.array(XtY))


def jacobi_eig(S, tol=1e-14, max_sweeps=100):
    """Eigenvalues (descending) and eigenvectors of a symmetric matrix by cyclic Jacobi."""
    A = [list(map(float, row)) for row in np.asarray(S)]
    n = len(A)
    V = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    scale = math.sqrt(sum(A[i][j] ** 2 for i in range(n) for j in range(n))) or 1.0
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[i][j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p][q] == 0.0:
                    continue
                theta = (A[q][q] - A[p][p]) / (2.0 * A[p][q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = A[k][p], A[k][q]
                    A[k][p] = c * akp - s * akq
                    A[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = A[p][k], A[q][k]
                    A[p][k] = c * apk - s * aqk
                    A[q][k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = V[k][p], V[k][q]
                    V[k][p] = c * vkp - s * vkq
                    V[k][q] = s * vkp + c * vkq
    values = np.array([A[i][i] for i in range(n)])
    vectors = np.array(V)
    order = np.argsort(-values)
    return values[order], vectors[:, order]


def projector(vectors):
    """Orthogonal projector onto the span of orthonormal columns (sign-free comparison)."""
    vectors = np.asarray(vectors)
    return vectors @ vectors.T
