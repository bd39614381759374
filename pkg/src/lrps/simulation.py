"""Synthetic multi-response regression experiments.

Data follow ``Y = X B + E`` with a standard normal design, one of three
coefficient conditions and one of two noise covariances:

* ``Sparse(s)``: Bernoulli(1/s) support on the first ``s`` columns, each
  non-zero row rescaled to unit L2 norm.
* ``DenseGeometric(lam)``: ``B = L diag(lam, lam^2, ...) R^T``.
* ``DenseKnownRank(lam, k_star)``: as above with ``k_star`` singular values
  equal to ``lam`` and the rest zero.
* ``Isotropic(sigma2)`` and ``Toeplitz(sigma2, rho)`` noise.

Every replication owns a Philox stream keyed by ``(seed, REP_STREAM, rep)``,
so a parallel run reproduces the serial one exactly.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import NamedTuple

import numpy as np

from lrps.estimators import (
    RegressionData,
    Smoother,
    fit,
    lrps_fit,
    lrps_path,
    ols_fit,
    rrr_path,
)
from lrps.exceptions import ConfigError, EigenTieError, ReplicationError
from lrps.linalg import kron, psd_sqrt, sample_gaussian_rows, sym_eig, toeplitz_cov
from lrps.metrics import estimation_mse, mspe, snr, theoretical_bias_variance
from lrps.model_selection import select_k

REP_STREAM = 0
DESIGN_STREAM = 1
COEFF_STREAM = 2
NOISE_STREAM = 3
TEST_STREAM = 4


def rng_stream(seed, *key):
    """Independent counter-based generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


# --------------------------------------------------------------------------
# Conditions and the experiment specification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Sparse:
    s: int


@dataclass(frozen=True)
class DenseGeometric:
    lam: float


@dataclass(frozen=True)
class DenseKnownRank:
    lam: float
    k_star: int


@dataclass(frozen=True)
class Isotropic:
    sigma2: float = 1.0


@dataclass(frozen=True)
class Toeplitz:
    sigma2: float = 1.0
    rho: float = 0.0


_B_TYPES = {"sparse": Sparse, "dense_geometric": DenseGeometric, "dense_known_rank": DenseKnownRank}
_NOISE_TYPES = {"isotropic": Isotropic, "toeplitz": Toeplitz}
_B_FIELDS = {"s": "s", "lambda": "lam", "lam": "lam", "k_star": "k_star"}


def _is_count(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


@dataclass(frozen=True)
class SimulationSpec:
    n: int
    p: int
    q: int
    b_condition: object = field(default_factory=lambda: DenseKnownRank(1.0, 1))
    noise_condition: object = field(default_factory=Isotropic)
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "p", "q", "replications"):
            value = getattr(self, name)
            if not _is_count(value) or value < 1:
                raise ConfigError(name, f"must be a positive integer, got {value!r}")
        if not _is_count(self.seed) or self.seed < 0:
            raise ConfigError("seed", f"must be a non-negative integer, got {self.seed!r}")
        if self.n <= self.p:
            raise ConfigError("n", f"need n > p for estimation, got n={self.n}, p={self.p}")
        m = min(self.p, self.q)
        b = self.b_condition
        if isinstance(b, Sparse):
            if not _is_count(b.s) or not 1 <= b.s <= m:
                raise ConfigError("b_condition.s", f"must be in 1..min(p,q)={m}, got {b.s!r}")
        elif isinstance(b, (DenseGeometric, DenseKnownRank)):
            if not 0.0 < b.lam <= 1.0:
                raise ConfigError("b_condition.lambda", f"must lie in (0, 1], got {b.lam!r}")
            if isinstance(b, DenseKnownRank) and (not _is_count(b.k_star) or not 1 <= b.k_star <= m):
                raise ConfigError(
                    "b_condition.k_star", f"must be in 1..min(p,q)={m}, got {b.k_star!r}"
                )
        else:
            raise ConfigError("b_condition", f"unknown coefficient condition {b!r}")
        e = self.noise_condition
        if not isinstance(e, (Isotropic, Toeplitz)):
            raise ConfigError("noise", f"unknown noise condition {e!r}")
        if not e.sigma2 > 0:
            raise ConfigError("noise.sigma2", f"must be positive, got {e.sigma2!r}")
        if isinstance(e, Toeplitz) and not -1.0 < e.rho < 1.0:
            raise ConfigError("noise.rho", f"must lie in (-1, 1), got {e.rho!r}")

    @classmethod
    def from_dict(cls, d):
        """Build from a config mapping (see README for the schema)."""
        if not isinstance(d, dict):
            raise ConfigError("simulation", "expected a mapping")
        for name in ("n", "p", "q"):
            if name not in d:
                raise ConfigError(name, "missing")
        b_conf = dict(d.get("b_condition", {"type": "dense_known_rank", "lambda": 1.0, "k_star": 1}))
        b_type = b_conf.pop("type", None)
        if b_type not in _B_TYPES:
            raise ConfigError("b_condition.type", f"expected one of {sorted(_B_TYPES)}, got {b_type!r}")
        try:
            b = _B_TYPES[b_type](**{_B_FIELDS.get(k, k): v for k, v in b_conf.items()})
        except TypeError as exc:
            raise ConfigError("b_condition", str(exc)) from exc
        e_conf = dict(d.get("noise", {"type": "isotropic"}))
        e_type = e_conf.pop("type", None)
        if e_type not in _NOISE_TYPES:
            raise ConfigError("noise.type", f"expected one of {sorted(_NOISE_TYPES)}, got {e_type!r}")
        try:
            e = _NOISE_TYPES[e_type](**e_conf)
        except TypeError as exc:
            raise ConfigError("noise", str(exc)) from exc
        return cls(
            n=d["n"],
            p=d["p"],
            q=d["q"],
            b_condition=b,
            noise_condition=e,
            replications=d.get("replications", 100),
            seed=d.get("seed", 0),
        )

    def to_dict(self):
        b_type = {v: k for k, v in _B_TYPES.items()}[type(self.b_condition)]
        b = {"type": b_type}
        for k, v in asdict(self.b_condition).items():
            b["lambda" if k == "lam" else k] = v
        e_type = {v: k for k, v in _NOISE_TYPES.items()}[type(self.noise_condition)]
        return {
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "b_condition": b,
            "noise": {"type": e_type, **asdict(self.noise_condition)},
            "replications": self.replications,
            "seed": self.seed,
        }


# --------------------------------------------------------------------------
# Generators
# --------------------------------------------------------------------------


def gen_design(n, p, rng):
    """n x p matrix of independent standard normals."""
    if n < 1 or p < 1:
        raise ValueError(f"design dimensions must be positive, got {n}x{p}")
    return rng.standard_normal((n, p))


def dense_factors(p, q, rng):
    """Orthonormal ``L`` (p x p) and ``R`` (q x q) from a normal and a uniform matrix."""
    A_L = rng.standard_normal((p, p))
    A_R = rng.uniform(size=(q, q))
    L = np.linalg.svd(A_L)[0]
    R = np.linalg.svd(A_R)[2].T
    return L, R


def coefficient_singular_values(spec):
    """Target singular values of B for the dense conditions, length ``min(p, q)``."""
    m = min(spec.p, spec.q)
    b = spec.b_condition
    if isinstance(b, DenseGeometric):
        return b.lam ** np.arange(1, m + 1, dtype=float)
    if isinstance(b, DenseKnownRank):
        d = np.zeros(m)
        d[: b.k_star] = b.lam
        return d
    raise ValueError("singular values are only prescribed for the dense conditions")


def gen_coeff(spec, rng):
    """Draw the p x q coefficient matrix for ``spec.b_condition``."""
    p, q = spec.p, spec.q
    b = spec.b_condition
    if isinstance(b, Sparse):
        B = np.zeros((p, q))
        B[:, : b.s] = rng.random((p, b.s)) < 1.0 / b.s
        norms = np.linalg.norm(B, axis=1, keepdims=True)
        return np.divide(B, norms, out=B, where=norms > 0)
    L, R = dense_factors(p, q, rng)
    m = min(p, q)
    return (L[:, :m] * coefficient_singular_values(spec)) @ R[:, :m].T


def gen_noise_cov(spec):
    """q x q error covariance for ``spec.noise_condition``."""
    e = spec.noise_condition
    if isinstance(e, Toeplitz):
        return toeplitz_cov(spec.q, e.sigma2, e.rho)
    return e.sigma2 * np.eye(spec.q)


class Replication(NamedTuple):
    X: np.ndarray
    B: np.ndarray
    Sigma_e: np.ndarray
    Y: np.ndarray

    @property
    def data(self):
        return RegressionData(self.X, self.Y)


def draw_replication(spec, rep):
    """Fresh ``X``, ``B`` and ``E`` for replication ``rep`` (1-based)."""
    rng = rng_stream(spec.seed, REP_STREAM, rep)
    X = gen_design(spec.n, spec.p, rng)
    B = gen_coeff(spec, rng)
    Sigma_e = gen_noise_cov(spec)
    E = sample_gaussian_rows(spec.n, Sigma_e, rng)
    return Replication(X, B, Sigma_e, X @ B + E)


# --------------------------------------------------------------------------
# Long-format result tables
# --------------------------------------------------------------------------


class Record(NamedTuple):
    method: str
    k: int
    rep: int
    metric: str
    value: float


def _fmt(v):
    return repr(float(v))


@dataclass
class ExperimentTable:
    """Long-format records plus an optional averaged spectrum report."""

    records: list = field(default_factory=list)
    spectra: list = field(default_factory=list)  # (source, index, value)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(Record._fields)
        for r in self.records:
            w.writerow([r.method, r.k, r.rep, r.metric, _fmt(r.value)])
        return buf.getvalue()

    def to_json(self):
        return json.dumps([r._asdict() for r in self.records], indent=1)

    def spectra_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source", "index", "value"])
        for source, index, value in self.spectra:
            w.writerow([source, index, _fmt(value)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = csv.DictReader(io.StringIO(text))
        return cls(
            [
                Record(r["method"], int(r["k"]), int(r["rep"]), r["metric"], float(r["value"]))
                for r in rows
            ]
        )

    def values(self, method, metric="mse"):
        """``{k: array of per-replication values}`` ordered by replication."""
        out = {}
        for r in self.records:
            if r.method == method and r.metric == metric:
                out.setdefault(r.k, []).append(r.value)
        return {k: np.array(v) for k, v in out.items()}

    def mean(self, method, metric="mse"):
        return {k: float(v.mean()) for k, v in self.values(method, metric).items()}

    def summary_csv(self, metric="mse"):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "k", "metric", "mean", "sd", "count"])
        methods = sorted({r.method for r in self.records if r.metric == metric})
        for method in methods:
            for k, v in sorted(self.values(method, metric).items()):
                sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
                w.writerow([method, k, metric, _fmt(v.mean()), _fmt(sd), v.size])
        return buf.getvalue()


# --------------------------------------------------------------------------
# Estimation-error experiment
# --------------------------------------------------------------------------


def resolve_grids(spec, methods, k_grid=None):
    """Per-method rank grids, validated against each method's admissible range."""
    methods = [m.upper() for m in methods]
    upper = {"LRPS": spec.q, "RRR": min(spec.p, spec.q)}
    grids = {}
    for m in methods:
        if m not in ("LRPS", "RRR", "OLS"):
            raise ConfigError("methods", f"unknown method {m!r}")
        if m == "OLS":
            continue
        if k_grid is None:
            grid = list(range(1, upper[m] + 1))
        elif isinstance(k_grid, dict):
            grid = list(k_grid.get(m, range(1, upper[m] + 1)))
        else:
            grid = list(k_grid)
        bad = [k for k in grid if not _is_count(k) or not 1 <= k <= upper[m]]
        if bad or not grid:
            raise ConfigError("k_grid", f"{m} ranks must lie in 1..{upper[m]}, got {bad or grid}")
        grids[m] = sorted(set(grid))
    if "OLS" in methods:
        if isinstance(k_grid, dict) and "OLS" in k_grid:
            grids["OLS"] = sorted(set(k_grid["OLS"]))
        elif k_grid is not None and not isinstance(k_grid, dict):
            grids["OLS"] = sorted(set(k_grid))
        else:
            union = sorted(set().union(*grids.values())) if grids else list(range(1, spec.q + 1))
            grids["OLS"] = union
    return {m: grids[m] for m in methods}


def _mse_replication(spec, grids, rep):
    try:
        draw = draw_replication(spec, rep)
        data = draw.data
        records = [Record("DATA", 0, rep, "snr", snr(draw.X, draw.B, draw.Sigma_e))]
        for method, ks in grids.items():
            if method == "OLS":
                err = estimation_mse(ols_fit(data).B_hat, draw.B)
                records.extend(Record("OLS", k, rep, "mse", err) for k in ks)
                continue
            path = lrps_path if method == "LRPS" else rrr_path
            for model in path(data, ks):
                records.append(Record(method, model.k, rep, "mse", estimation_mse(model.B_hat, draw.B)))
    except Exception as exc:
        raise ReplicationError(rep, exc) from exc
    spectrum_B = np.linalg.svd(draw.B, compute_uv=False)
    spectrum_noise = np.linalg.svd(psd_sqrt(draw.Sigma_e), compute_uv=False)
    return records, spectrum_B, spectrum_noise


def _map_reps(func, reps, workers):
    if workers is None or workers <= 1:
        return [func(rep) for rep in reps]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, reps))


def run_mse_experiment(spec, methods=("LRPS", "RRR", "OLS"), k_grid=None, workers=1):
    """Monte Carlo estimation error ``||B_hat - B||_F^2`` per method, rank and replication.

    Each replication draws new ``X``, ``B`` and ``E``. Besides the ``mse``
    records, one ``("DATA", 0, rep, "snr", value)`` record per replication
    is written, and ``table.spectra`` holds the replication-averaged singular
    values of ``B`` (source ``"B"``) and of ``Sigma_e^{1/2}`` (source
    ``"Sigma_e_sqrt"``).

    ``k_grid`` is ``None`` (full admissible grids), a list applied to every
    method, or a ``{method: list}`` mapping. OLS is recorded once per rank of
    its grid so that all methods line up on the same k axis.
    """
    grids = resolve_grids(spec, methods, k_grid)
    reps = range(1, spec.replications + 1)
    results = _map_reps(partial(_mse_replication, spec, grids), reps, workers)
    table = ExperimentTable()
    for records, _, _ in results:
        table.records.extend(records)
    mean_B = np.mean([r[1] for r in results], axis=0)
    mean_noise = np.mean([r[2] for r in results], axis=0)
    table.spectra = [("B", i + 1, v) for i, v in enumerate(mean_B)] + [
        ("Sigma_e_sqrt", i + 1, v) for i, v in enumerate(mean_noise)
    ]
    return table


# --------------------------------------------------------------------------
# Large-sample bias/variance approximation versus Monte Carlo
# --------------------------------------------------------------------------


def population_basis(B, S_X, Sigma_e):
    """Eigen-decomposition of ``Sigma_y = B^T S_X B + Sigma_e``."""
    return sym_eig(B.T @ S_X @ B + Sigma_e, psd=True)


@dataclass
class BiasVarianceTable:
    """Replication-averaged rows ``(k, bias2, variance, theoretical_mse, empirical_mse_lrps, empirical_mse_rrr)``."""

    rows: list
    projector: str

    COLUMNS = ("k", "bias2", "variance", "theoretical_mse", "empirical_mse_lrps", "empirical_mse_rrr")

    def column(self, name):
        i = self.COLUMNS.index(name)
        return np.array([row[i] for row in self.rows])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows:
            w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
        return buf.getvalue()


def _bias_variance_replication(spec, ks, projector, rep):
    draw = draw_replication(spec, rep)
    data = draw.data
    S_X = draw.X.T @ draw.X / spec.n
    if projector == "population":
        pop = population_basis(draw.B, S_X, draw.Sigma_e).vectors
    rrr_ks = [k for k in ks if k <= min(spec.p, spec.q)]
    rrr = {m.k: estimation_mse(m.B_hat, draw.B) for m in rrr_path(data, rrr_ks)} if rrr_ks else {}
    out = []
    for model in lrps_path(data, ks):
        basis = model.basis if projector == "empirical" else pop[:, : model.k]
        var, bias2 = theoretical_bias_variance(draw.B, S_X, draw.Sigma_e, Smoother(basis), spec.n)
        out.append(
            (model.k, bias2, var, var + bias2, estimation_mse(model.B_hat, draw.B), rrr.get(model.k, np.nan))
        )
    return out


def run_bias_variance_experiment(spec, k_grid=None, projector="empirical", workers=1):
    """Average the approximate LRPS bias^2, variance and MSE over replications
    and set them against the Monte Carlo estimation error of LRPS and RRR.

    ``projector`` selects the empirical ``W_k`` (default) or the population
    one built from ``B^T S_X B + Sigma_e``. RRR columns are NaN for ``k > min(p, q)``.
    """
    if projector not in ("empirical", "population"):
        raise ConfigError("projector", f"expected 'empirical' or 'population', got {projector!r}")
    ks = resolve_grids(spec, ["LRPS"], {"LRPS": k_grid} if k_grid is not None else None)["LRPS"]
    reps = range(1, spec.replications + 1)
    results = _map_reps(partial(_bias_variance_replication, spec, ks, projector), reps, workers)
    arr = np.array(results)  # reps x len(ks) x 6
    rows = []
    for j, k in enumerate(ks):
        means = arr[:, j, 1:].mean(axis=0)
        rows.append((k, *map(float, means)))
    return BiasVarianceTable(rows=rows, projector=projector)


# --------------------------------------------------------------------------
# Large-sample distribution check for LRPS
# --------------------------------------------------------------------------


def _projector_derivative(values, vectors, k, H):
    """First-order change of the rank-k eigenprojector of a symmetric matrix perturbed by H."""
    Vk, Vr = vectors[:, :k], vectors[:, k:]
    gaps = values[:k, None] - values[None, k:]
    C = (Vk.T @ H @ Vr) / gaps
    return Vk @ C @ Vr.T + Vr @ C.T @ Vk.T


def delta_method_covariance(B, S_X, Sigma_e, k):
    """Limiting covariance of ``sqrt(n) vec(B_tilde - B W_k)`` under Gaussian errors,
    keeping the fluctuation of the estimated eigenvectors.

    Linearises ``B_hat W_hat`` around ``B W`` with
    ``sqrt(n)(B_hat - B) = S_X^{-1} X^T E / sqrt(n)`` and the first-order
    eigenprojector perturbation driven by ``sqrt(n)(S_Y - Sigma_y)``, whose
    cross term ``(XB)^T E / sqrt(n)`` and ``sqrt(n)(S_e - Sigma_e)`` both stay
    O(1). The term ``W Sigma_e W kron S_X^{-1}`` is recovered when ``B = 0``
    or ``k = q``. ``vec`` stacks columns.
    """
    p, q = B.shape
    eig = population_basis(B, S_X, Sigma_e)
    lam, V = eig.values, eig.vectors
    W = V[:, :k] @ V[:, :k].T
    S_X_inv = np.linalg.inv(S_X)
    eye_p, eye_q = np.eye(p), np.eye(q)

    # Linear-in-E part: one pq x q map per design coordinate a.
    maps = []
    for a in range(p):
        cols = []
        for c in range(q):
            xe = np.outer(eye_p[a], eye_q[c])  # p x q
            A = S_X_inv @ xe
            G = B.T @ xe + xe.T @ B
            Z = A @ W + B @ _projector_derivative(lam, V, k, G)
            cols.append(Z.ravel(order="F"))
        maps.append(np.array(cols).T)
    cov = np.zeros((p * q, p * q))
    for a in range(p):
        for b in range(p):
            cov += S_X[a, b] * maps[a] @ Sigma_e @ maps[b].T

    # Quadratic part from the sample error covariance (Gaussian fourth moments).
    N = np.zeros((p * q, q * q))
    for c in range(q):
        for d in range(q):
            H = np.zeros((q, q))
            H[c, d] = 1.0
            N[:, c * q + d] = (B @ _projector_derivative(lam, V, k, H)).ravel(order="F")
    fourth = np.einsum("ac,bd->abcd", Sigma_e, Sigma_e) + np.einsum("ad,bc->abcd", Sigma_e, Sigma_e)
    cov += N @ fourth.reshape(q * q, q * q) @ N.T
    return cov


@dataclass
class AsymptoticReport:
    k: int
    n: int
    reps: int
    mean: np.ndarray  # mean of sqrt(n) vec(B_tilde - B W_k)
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray  # W Sigma_e W kron S_X^{-1}
    discrepancy: float  # relative Frobenius, empirical vs theoretical
    standard_errors: np.ndarray  # sqrt(diag(theoretical) / reps)
    max_abs_z: float
    delta_method_cov: np.ndarray
    delta_method_discrepancy: float
    eigenvalues: np.ndarray  # spectrum of Sigma_y

    @property
    def mean_within_band(self):
        """Every mean entry within three standard errors of zero."""
        return self.max_abs_z < 3.0

    def to_dict(self):
        out = {}
        for key, value in self.__dict__.items():
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        out["mean_within_band"] = self.mean_within_band
        return out


def verify_asymptotic_distribution(spec, k, n_large=None, reps=None, tie_rtol=1e-8):
    """Monte Carlo check of the large-sample law of ``sqrt(n) vec(B_tilde - B W_k)``.

    One design ``X`` (n = ``n_large``, default ``spec.n``) and one ``B`` are
    drawn and held fixed; ``reps`` (default ``spec.replications``) error
    matrices are drawn around them. ``W_k`` is the population projector of
    ``Sigma_y = B^T S_X B + Sigma_e`` and ``S_X`` stands in for its limit.

    Raises
    ------
    EigenTieError
        If eigenvalues k and k+1 of ``Sigma_y`` coincide (relative ``tie_rtol``).
    """
    n = int(n_large or spec.n)
    reps = int(reps or spec.replications)
    if not 1 <= k <= spec.q:
        raise ConfigError("k", f"must lie in 1..q={spec.q}, got {k}")
    if reps < 2:
        raise ConfigError("reps", "need at least two replications")
    X = gen_design(n, spec.p, rng_stream(spec.seed, DESIGN_STREAM))
    B = gen_coeff(spec, rng_stream(spec.seed, COEFF_STREAM))
    Sigma_e = gen_noise_cov(spec)
    S_X = X.T @ X / n
    eig = population_basis(B, S_X, Sigma_e)
    if k < spec.q and eig.values[k - 1] - eig.values[k] <= tie_rtol * eig.values[0]:
        raise EigenTieError(
            f"eigenvalues {k} and {k + 1} of Sigma_y are tied "
            f"({eig.values[k - 1]:.6g} vs {eig.values[k]:.6g}); W_k is not unique"
        )
    W = eig.vectors[:, :k] @ eig.vectors[:, :k].T
    target = B @ W
    XB = X @ B
    z = np.empty((reps, spec.p * spec.q))
    for r in range(reps):
        E = sample_gaussian_rows(n, Sigma_e, rng_stream(spec.seed, NOISE_STREAM, r))
        B_tilde = lrps_fit(RegressionData(X, XB + E), k).B_hat
        z[r] = np.sqrt(n) * (B_tilde - target).ravel(order="F")
    mean = z.mean(axis=0)
    emp = np.cov(z, rowvar=False)
    theory = kron(W @ Sigma_e @ W, np.linalg.inv(S_X))
    se = np.sqrt(np.diag(theory) / reps)
    delta = delta_method_covariance(B, S_X, Sigma_e, k)
    return AsymptoticReport(
        k=k,
        n=n,
        reps=reps,
        mean=mean,
        empirical_cov=emp,
        theoretical_cov=theory,
        discrepancy=float(np.linalg.norm(emp - theory) / np.linalg.norm(theory)),
        standard_errors=se,
        max_abs_z=float(np.max(np.abs(mean) / se)),
        delta_method_cov=delta,
        delta_method_discrepancy=float(np.linalg.norm(emp - delta) / np.linalg.norm(delta)),
        eigenvalues=eig.values,
    )


# --------------------------------------------------------------------------
# Rank selection study
# --------------------------------------------------------------------------


def _rank_selection_replication(spec, methods, k_max, rep):
    try:
        draw = draw_replication(spec, rep)
        data = draw.data
        rng = rng_stream(spec.seed, TEST_STREAM, rep)
        X_test = gen_design(spec.n, spec.p, rng)
        Y_test = X_test @ draw.B + sample_gaussian_rows(spec.n, draw.Sigma_e, rng)
        records = []
        for method in methods:
            k_hat = select_k(data, method, k_max).k_hat
            model = fit(data, method, k_hat)
            records.append(Record(method, k_hat, rep, "k_hat", float(k_hat)))
            records.append(
                Record(method, k_hat, rep, "prediction_error", mspe(Y_test, X_test @ model.B_hat))
            )
    except Exception as exc:
        raise ReplicationError(rep, exc) from exc
    return records


def run_rank_selection_study(spec, methods=("LRPS", "RRR"), k_max=None, workers=1):
    """Cross-validated ``k_hat`` and out-of-sample MSPE per replication.

    The test sample has ``spec.n`` fresh rows from the same model. Records use
    ``k = k_hat`` with metrics ``"k_hat"`` and ``"prediction_error"``.
    """
    methods = [m.upper() for m in methods]
    for m in methods:
        if m not in ("LRPS", "RRR"):
            raise ConfigError("methods", f"rank selection needs LRPS or RRR, got {m!r}")
    reps = range(1, spec.replications + 1)
    results = _map_reps(partial(_rank_selection_replication, spec, methods, k_max), reps, workers)
    return ExperimentTable([r for recs in results for r in recs])


def k_hat_histogram(table):
    """``[(method, k, count), ...]`` from a rank-selection table."""
    counts = {}
    for r in table.records:
        if r.metric == "k_hat":
            counts[(r.method, r.k)] = counts.get((r.method, r.k), 0) + 1
    return [(m, k, c) for (m, k), c in sorted(counts.items())]
