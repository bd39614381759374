"""Two-fold cross-validation for choosing the rank ``k`` of LRPS or RRR.

The folds are the first ``ceil(n/2)`` rows and the remaining rows, in order,
so time-ordered data is never shuffled. Each fold's projector comes from its
own training half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lrps.estimators import fit, lrps_path, rrr_path

#: Relative tolerance (w.r.t. ||Y||_F^2) under which two cvMSPE values count as tied.
TIE_RTOL = 1e-10


@dataclass(frozen=True)
class CvResult:
    per_k: list  # [(k, cvMSPE), ...] for k = 1..k_max
    k_hat: int
    method: str

    def normalized(self, n, q):
        """cvMSPE divided by ``q * n`` for comparison across datasets."""
        return [(k, v / (q * n)) for k, v in self.per_k]


def fold_slices(n):
    half = (n + 1) // 2
    return slice(0, half), slice(half, n)


def _check_folds(data):
    first, second = fold_slices(data.n)
    smallest = min(first.stop - first.start, second.stop - second.start)
    if smallest <= data.p:
        raise ValueError(
            f"fold of {smallest} rows is too small for OLS with p={data.p} "
            f"(need n/2 > p, n={data.n})"
        )
    return first, second


def cv_mspe(data, k, method="LRPS"):
    """Two-fold cvMSPE: half the sum of the two held-out squared Frobenius errors.

    ``method`` is "LRPS", "RRR", or "OLS" (``k`` ignored).
    """
    first, second = _check_folds(data)
    total = 0.0
    for train, test in ((second, first), (first, second)):
        model = fit(data.rows(train), method, k)
        resid = data.Y[test] - data.X[test] @ model.B_hat
        total += float(np.sum(resid**2))
    return 0.5 * total


def default_grid_max(data, method):
    method = method.upper()
    if method == "LRPS":
        return min(data.q, data.n // 2)
    if method == "RRR":
        return min(data.p, data.q)
    raise ValueError(f"rank selection is defined for LRPS and RRR, not {method!r}")


def select_k(data, method="LRPS", k_max=None):
    """Exhaustive 2-fold CV over ``k = 1..k_max``; ties go to the smallest k.

    The default grid is ``1..min(q, n // 2)`` for LRPS and ``1..min(p, q)`` for
    RRR; ``k_max`` can only shrink it. Values within ``TIE_RTOL * ||Y||_F^2`` of
    the minimum are treated as equal, so exact-fit plateaus resolve to the
    smallest rank rather than to rounding noise.
    """
    method = method.upper()
    upper = default_grid_max(data, method)
    if k_max is not None:
        upper = min(upper, int(k_max))
    if upper < 1:
        raise ValueError(f"empty rank grid for {method} (k_max={k_max})")
    first, second = _check_folds(data)
    ks = list(range(1, upper + 1))
    path = lrps_path if method == "LRPS" else rrr_path
    errors = np.zeros(upper)
    for train, test in ((second, first), (first, second)):
        models = path(data.rows(train), ks)
        X_test, Y_test = data.X[test], data.Y[test]
        for i, model in enumerate(models):
            errors[i] += np.sum((Y_test - X_test @ model.B_hat) ** 2)
    errors *= 0.5
    threshold = errors.min() + TIE_RTOL * float(np.sum(data.Y**2))
    k_hat = ks[int(np.flatnonzero(errors <= threshold)[0])]
    return CvResult(per_k=list(zip(ks, errors.tolist())), k_hat=k_hat, method=method)
