"""Wall-clock scaling harness for OLS, LRPS and RRR.

One dimension (n, p or q) is multiplied by each factor in turn while the
others stay at their base values. For every (factor, rep) a fresh data set is
drawn and all three methods are timed on it. Ratios are formed from medians.
The linear-algebra backend is pinned to one thread while timing.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy
from threadpoolctl import threadpool_info, threadpool_limits

from lrps.estimators import METHODS, RegressionData, fit
from lrps.exceptions import ConfigError
from lrps.linalg import sample_gaussian_rows
from lrps.simulation import DenseKnownRank, Isotropic, SimulationSpec, gen_coeff, gen_design, rng_stream

SWEEPABLE = ("n", "p", "q")
#: Random-stream key reserved for benchmark data, distinct from the simulation streams.
BENCH_STREAM = 5


@dataclass(frozen=True)
class ScalingPlan:
    """Base dimensions, the swept dimension and the factors applied to it."""

    n: int
    p: int
    q: int
    swept: str = "q"
    factors: tuple = (1, 2, 3, 4, 5)
    k: int = 1
    reps: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        for name in ("n", "p", "q", "k", "reps"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if self.swept not in SWEEPABLE:
            raise ConfigError("swept", f"expected one of {SWEEPABLE}, got {self.swept!r}")
        f = self.factors
        if not f or any(isinstance(x, bool) or not isinstance(x, (int, np.integer)) or x < 1 for x in f):
            raise ConfigError("factors", f"need positive integers, got {list(f)}")
        if any(b <= a for a, b in zip(f, f[1:])):
            raise ConfigError("factors", f"must be strictly ascending, got {list(f)}")
        for factor in f:
            n, p, q = self.dims(factor)
            if n <= p:
                raise ConfigError("factors", f"factor {factor} gives n={n} <= p={p}")
            if self.k > min(p, q):
                raise ConfigError("k", f"k={self.k} exceeds min(p, q)={min(p, q)} at factor {factor}")

    def dims(self, factor):
        """``(n, p, q)`` at a scaling factor."""
        d = {"n": self.n, "p": self.p, "q": self.q}
        d[self.swept] *= factor
        return d["n"], d["p"], d["q"]

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        base = d.pop("base", None)
        if base is not None:
            d.update(base)
        known = {"n", "p", "q", "swept", "factors", "k", "reps", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown bench field")
        for name in ("n", "p", "q"):
            if name not in d:
                raise ConfigError(name, "missing base dimension")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["factors"] = list(self.factors)
        return d


def _fresh(data):
    # RegressionData caches the Cholesky factor and S_XY; every timed call
    # starts from an uncached copy so that no method inherits another's work.
    return RegressionData(data.X, data.Y)


def _timed_fit(data, method, k):
    data = _fresh(data)
    t0 = time.perf_counter()
    fit(data, method, k)
    return time.perf_counter() - t0


def time_fit(data, method, k, reps):
    """``reps`` wall-clock timings (seconds) of one fit call, after one warm-up call."""
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    _timed_fit(data, method, k)
    return [_timed_fit(data, method, k) for _ in range(reps)]


class TimingRecord(NamedTuple):
    method: str
    factor: int
    rep: int
    seconds: float


@dataclass
class TimingTable:
    """Raw timing records and the plan that produced them."""

    plan: ScalingPlan
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def seconds(self, method, factor):
        return np.array([r.seconds for r in self.records if r.method == method and r.factor == factor])

    def summary(self):
        """Derived rows: medians, means and the two median-based ratios."""
        methods = [m for m in METHODS if any(r.method == m for r in self.records)]
        med = {(m, f): float(np.median(self.seconds(m, f))) for m in methods for f in self.plan.factors}
        base = self.plan.factors[0]
        rows = []
        for f in self.plan.factors:
            dim = self.plan.dims(f)[SWEEPABLE.index(self.plan.swept)]
            for m in methods:
                rows.append(
                    {
                        "method": m,
                        "factor": f,
                        "dim": dim,
                        "median_seconds": med[m, f],
                        "mean_seconds": float(np.mean(self.seconds(m, f))),
                        "ratio_to_ols": med[m, f] / med["OLS", f] if "OLS" in methods else float("nan"),
                        "ratio_to_factor1": med[m, f] / med[m, base],
                    }
                )
        return rows

    def ratio(self, method, factor, column="ratio_to_ols"):
        for row in self.summary():
            if row["method"] == method and row["factor"] == factor:
                return row[column]
        raise KeyError((method, factor))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TimingRecord._fields)
        for r in self.records:
            w.writerow([r.method, r.factor, r.rep, repr(r.seconds)])
        return buf.getvalue()

    def summary_csv(self):
        rows = self.summary()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    def metadata_json(self):
        return json.dumps({"plan": self.plan.to_dict(), **self.metadata}, indent=2, default=str)

    @classmethod
    def from_csv(cls, plan, text):
        reader = csv.DictReader(io.StringIO(text))
        records = [
            TimingRecord(row["method"], int(row["factor"]), int(row["rep"]), float(row["seconds"]))
            for row in reader
        ]
        return cls(plan=plan, records=records)


def scaling_slope(table, method):
    """Least-squares slope of log(median seconds) against log(swept dimension)."""
    rows = [r for r in table.summary() if r["method"] == method]
    if len(rows) < 2:
        raise ValueError("need at least two factors for a slope")
    x = np.log([r["dim"] for r in rows])
    y = np.log([r["median_seconds"] for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def _bench_data(plan, factor, rep):
    n, p, q = plan.dims(factor)
    spec = SimulationSpec(n, p, q, DenseKnownRank(1.0, 1), Isotropic(1.0), replications=1, seed=plan.seed)
    rng = rng_stream(plan.seed, BENCH_STREAM, factor, rep)
    X = gen_design(n, p, rng)
    B = gen_coeff(spec, rng)
    E = sample_gaussian_rows(n, np.eye(q), rng)
    return RegressionData(X, X @ B + E)


def machine_info():
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "cpu_count": os.cpu_count(),
    }


def run_scaling(plan, methods=METHODS):
    """Time every method on fresh data for each (factor, rep) of ``plan``.

    Runs serially with the BLAS/LAPACK thread pools limited to one thread.
    Only the fit call is timed; one untimed warm-up fit per method and factor
    precedes the measurements.
    """
    table = TimingTable(plan=plan)
    with threadpool_limits(limits=1):
        pools = threadpool_info()
        for factor in plan.factors:
            warm = _bench_data(plan, factor, 0)
            for m in methods:
                _timed_fit(warm, m, plan.k)
            for rep in range(1, plan.reps + 1):
                data = _bench_data(plan, factor, rep)
                for m in methods:
                    table.records.append(TimingRecord(m, factor, rep, _timed_fit(data, m, plan.k)))
    table.metadata = {
        "machine": machine_info(),
        "thread_pools": [
            {k: pool.get(k) for k in ("user_api", "internal_api", "num_threads", "version")} for pool in pools
        ],
        "dims": {f: dict(zip(SWEEPABLE, plan.dims(f))) for f in plan.factors},
    }
    return table
