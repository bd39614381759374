"""Command-line interface: ``lrps {simulate,fit,cv,bench,verify} --config FILE``.

Every run writes its outputs plus ``manifest.json`` into ``--out-dir``. A
manifest can be passed back as ``--config`` to repeat the run. Exit status is
0 on success, 2 for configuration errors and 1 for runtime or numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from lrps import __version__
from lrps.bench import ScalingPlan, run_scaling, scaling_slope
from lrps.estimators import METHODS, RegressionData, fit
from lrps.exceptions import ConfigError, LRPSError
from lrps.metrics import mspe
from lrps.model_selection import select_k
from lrps.pipeline import PipelineConfig, load_csv, run_pipeline
from lrps.simulation import (
    SimulationSpec,
    k_hat_histogram,
    run_bias_variance_experiment,
    run_mse_experiment,
    run_rank_selection_study,
    verify_asymptotic_distribution,
)

MANIFEST_SCHEMA = "lrps-manifest/1"
SUBCOMMANDS = ("simulate", "fit", "cv", "bench", "verify")


# --------------------------------------------------------------------------
# Config handling
# --------------------------------------------------------------------------


def load_config(path, subcommand):
    """Parse a YAML/JSON config, or unwrap the ``config`` of a manifest.

    Relative data paths are resolved against the config file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"{path} is not valid YAML/JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("--config", f"{path} must contain a mapping")
    if cfg.get("schema") == MANIFEST_SCHEMA:
        if cfg.get("subcommand") != subcommand:
            raise ConfigError(
                "subcommand", f"manifest was written by {cfg.get('subcommand')!r}, not {subcommand!r}"
            )
        cfg = cfg["config"]
    data = cfg.get("data")
    if isinstance(data, dict) and "path" in data:
        cfg = dict(cfg, data=dict(data, path=str((path.parent / data["path"]).resolve())))
    return cfg


def _section(cfg, name, required=True):
    value = cfg.get(name)
    if value is None:
        if required:
            raise ConfigError(name, "missing section")
        return None
    if not isinstance(value, dict):
        raise ConfigError(name, "expected a mapping")
    return value


def _simulation(cfg, name, seed_override):
    d = dict(_section(cfg, name))
    if seed_override is not None:
        d["seed"] = seed_override
    return SimulationSpec.from_dict(d)


def _methods(cfg, default=METHODS):
    methods = cfg.get("methods", list(default))
    if isinstance(methods, str):
        methods = [methods]
    out = []
    for m in methods:
        if str(m).upper() not in METHODS:
            raise ConfigError("methods", f"unknown method {m!r}; expected {METHODS}")
        out.append(str(m).upper())
    return out


def _workers(threads):
    if threads in (None, "auto"):
        return os.cpu_count() or 1
    return threads


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Run:
    """Collects output files and writes them with the manifest."""

    def __init__(self, out_dir, subcommand):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.subcommand = subcommand
        self.outputs = []
        self.inputs = {}

    def write(self, name, text):
        (self.out_dir / name).write_text(text, encoding="utf-8")
        self.outputs.append(name)

    def write_json(self, name, obj):
        self.write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def manifest(self, config, seed):
        self.write_json(
            "manifest.json",
            {
                "schema": MANIFEST_SCHEMA,
                "subcommand": self.subcommand,
                "config": config,
                "seed": seed,
                "version": __version__,
                "inputs": self.inputs,
                "outputs": sorted(self.outputs + ["manifest.json"]),
            },
        )


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v):
    return repr(float(v))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_simulate(cfg, run, seed_override=None, threads=None):
    """Monte Carlo estimation-error study; writes results, summary and spectra tables."""
    spec = _simulation(cfg, "simulation", seed_override)
    methods = _methods(cfg)
    k_grid = cfg.get("k_grid")
    table = run_mse_experiment(spec, methods, k_grid, workers=_workers(threads))
    run.write("results.csv", table.to_csv())
    run.write("results.json", table.to_json() + "\n")
    run.write("summary.csv", table.summary_csv())
    run.write("spectra.csv", table.spectra_csv())
    resolved = {"simulation": spec.to_dict(), "methods": methods}
    if k_grid is not None:
        resolved["k_grid"] = k_grid
    return resolved, spec.seed


def _prepared_data(cfg, run):
    data_cfg = _section(cfg, "data")
    for field in ("path", "x_columns", "y_columns"):
        if field not in data_cfg:
            raise ConfigError(f"data.{field}", "missing")
    path = data_cfg["path"]
    dataset = load_csv(path, list(data_cfg["x_columns"]), list(data_cfg["y_columns"]))
    run.inputs[str(path)] = _sha256(path)
    pipe_cfg = PipelineConfig.from_dict(cfg.get("pipeline") or {})
    return dataset, pipe_cfg, run_pipeline(dataset, pipe_cfg)


def _rank_request(cfg):
    k = cfg.get("k", "cv")
    k_max = cfg.get("k_max")
    if k != "cv" and (isinstance(k, bool) or not isinstance(k, int) or k < 1):
        raise ConfigError("k", f"expected a positive integer or 'cv', got {k!r}")
    if k_max is not None and (isinstance(k_max, bool) or not isinstance(k_max, int) or k_max < 1):
        raise ConfigError("k_max", f"expected a positive integer, got {k_max!r}")
    return k, k_max


def _write_cv(run, result, n, q, name="cv.csv"):
    normalized = dict(result.normalized(n, q))
    rows = [[result.method, k, _num(v), _num(normalized[k])] for k, v in result.per_k]
    run.write(name, _csv_text(["method", "k", "cv_mspe", "cv_mspe_normalized"], rows))


def cmd_fit(cfg, run, seed_override=None, threads=None):
    """Preprocess a CSV, fit one estimator and write coefficients and diagnostics."""
    dataset, pipe_cfg, prepared = _prepared_data(cfg, run)
    method = str(cfg.get("method", "LRPS")).upper()
    if method not in METHODS:
        raise ConfigError("method", f"unknown method {method!r}; expected {METHODS}")
    k, k_max = _rank_request(cfg)
    train = RegressionData(prepared.train.X, prepared.train.Y)
    report = {"method": method, "n_train": train.n, "n_test": prepared.test.n, "p": train.p, "q": train.q}
    if method == "OLS":
        k = None
    elif k == "cv":
        result = select_k(train, method, k_max)
        _write_cv(run, result, train.n, train.q)
        k = result.k_hat
        report["k_selection"] = "cv"
    else:
        report["k_selection"] = "fixed"
    model = fit(train, method, k)
    report["k"] = k
    report["rank_warning"] = model.rank_warning
    report["train_mspe"] = mspe(train.Y, train.X @ model.B_hat)
    if prepared.test.n > 0:
        report["test_mspe"] = mspe(prepared.test.Y, prepared.test.X @ model.B_hat)
    rows = [[name] + [f"{v:.12g}" for v in row] for name, row in zip(dataset.x_names, model.B_hat)]
    run.write("coefficients.csv", _csv_text(["covariate", *dataset.y_names], rows))
    run.write_json("fit.json", report)
    resolved = {
        "data": cfg["data"],
        "pipeline": pipe_cfg.to_dict(),
        "method": method,
        "k": cfg.get("k", "cv") if method != "OLS" else None,
    }
    if k_max is not None:
        resolved["k_max"] = k_max
    return resolved, None


def cmd_cv(cfg, run, seed_override=None, threads=None):
    """Two-fold CV rank selection on a data set, or a simulated batch of k_hat draws."""
    methods = _methods(cfg, default=("LRPS",))
    for m in methods:
        if m == "OLS":
            raise ConfigError("methods", "cross-validation selects a rank; OLS has none")
    _, k_max = _rank_request(dict(cfg, k="cv"))
    if "simulation" in cfg:
        spec = _simulation(cfg, "simulation", seed_override)
        table = run_rank_selection_study(spec, methods, k_max, workers=_workers(threads))
        run.write("k_hat.csv", table.to_csv())
        run.write("k_hat_histogram.csv", _csv_text(["method", "k", "count"], k_hat_histogram(table)))
        resolved = {"simulation": spec.to_dict(), "methods": methods, "k_max": k_max}
        return resolved, spec.seed
    _, pipe_cfg, prepared = _prepared_data(cfg, run)
    train = RegressionData(prepared.train.X, prepared.train.Y)
    summary = {}
    for method in methods:
        result = select_k(train, method, k_max)
        _write_cv(run, result, train.n, train.q, name=f"cv_{method.lower()}.csv")
        summary[method] = {"k_hat": result.k_hat}
    run.write_json("k_hat.json", summary)
    resolved = {"data": cfg["data"], "pipeline": pipe_cfg.to_dict(), "methods": methods, "k_max": k_max}
    return resolved, None


def cmd_bench(cfg, run, seed_override=None, threads=None):
    """Single-threaded timing sweep; writes raw timings, ratios and metadata."""
    if threads not in (None, 1):
        raise ConfigError("--threads", "benchmarks always run on a single thread")
    d = dict(_section(cfg, "bench"))
    if seed_override is not None:
        d["seed"] = seed_override
    plan = ScalingPlan.from_dict(d)
    table = run_scaling(plan)
    run.write("timings.csv", table.to_csv())
    run.write("ratios.csv", table.summary_csv())
    meta = json.loads(table.metadata_json())
    if len(plan.factors) > 1:
        meta["log_log_slopes"] = {m: scaling_slope(table, m) for m in METHODS}
    run.write_json("metadata.json", meta)
    return {"bench": plan.to_dict()}, plan.seed


def cmd_verify(cfg, run, seed_override=None, threads=None):
    """Large-sample distribution check and bias/variance curve versus Monte Carlo."""
    resolved = {}
    seed = None
    if cfg.get("asymptotic") is None and cfg.get("bias_variance") is None:
        raise ConfigError("asymptotic", "give an 'asymptotic' and/or a 'bias_variance' section")
    if cfg.get("asymptotic") is not None:
        a = _section(cfg, "asymptotic")
        spec = _simulation(a, "simulation", seed_override)
        if "k" not in a:
            raise ConfigError("asymptotic.k", "missing")
        report = verify_asymptotic_distribution(spec, a["k"], a.get("n_large"), a.get("reps"))
        run.write_json("asymptotic.json", report.to_dict())
        resolved["asymptotic"] = {
            "simulation": spec.to_dict(),
            "k": report.k,
            "n_large": report.n,
            "reps": report.reps,
        }
        seed = spec.seed
    if cfg.get("bias_variance") is not None:
        b = _section(cfg, "bias_variance")
        spec = _simulation(b, "simulation", seed_override)
        projector = b.get("projector", "empirical")
        if projector not in ("empirical", "population"):
            raise ConfigError("bias_variance.projector", f"expected 'empirical' or 'population', got {projector!r}")
        table = run_bias_variance_experiment(spec, b.get("k_grid"), projector, workers=_workers(threads))
        run.write("bias_variance.csv", table.to_csv())
        resolved["bias_variance"] = {"simulation": spec.to_dict(), "k_grid": b.get("k_grid"), "projector": projector}
        seed = spec.seed if seed is None else seed
    return resolved, seed


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "cv": cmd_cv,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _threads(value):
    if value == "auto":
        return value
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'auto', got {value!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser():
    parser = argparse.ArgumentParser(prog="lrps", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name].__doc__)
        p.add_argument("--config", required=True, help="YAML/JSON config or a previous manifest.json")
        p.add_argument("--out-dir", required=True, help="directory for outputs and manifest.json")
        p.add_argument("--seed-override", type=int, default=None, help="replace the config's master seed")
        p.add_argument(
            "--threads",
            type=_threads,
            default=None,
            help="worker processes for replications ('auto' = CPU count; benchmarks accept only 1)",
        )
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        cfg = load_config(args.config, args.subcommand)
        run = _Run(args.out_dir, args.subcommand)
        resolved, seed = COMMANDS[args.subcommand](cfg, run, args.seed_override, args.threads)
        run.manifest(resolved, seed)
    except ConfigError as exc:
        print(f"lrps {args.subcommand}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (LRPSError, np.linalg.LinAlgError, ValueError, ArithmeticError, OSError) as exc:
        print(f"lrps {args.subcommand}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name in run.outputs:
        print(run.out_dir / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
