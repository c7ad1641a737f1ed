"""Command-line front end.

Five subcommands: infer, simulate, oracle, basis-pursuit, sparsity-curve.
Options can also come from a JSON config file (--config); explicit flags
win on conflict and unknown config keys are rejected. Every command
validates its inputs before computing, writes outputs atomically, and
keeps wall-clock data out of the output documents (a sidecar .log file
records timing and seed provenance instead), so a rerun with the same
seed produces byte-identical files.

Exit codes: 0 success, 2 input or validation failure, 3 numerical or
convergence failure.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
import time

from .dataio import (
    atomic_write,
    coverage_to_doc,
    dumps_json,
    loads_json,
    read_matrix_csv,
    read_vector_csv,
    report_to_doc,
    write_beta_csv,
    write_curve_csv,
    write_curves_csv,
    write_matrix_csv,
    write_per_coordinate_csv,
)
from .errors import (
    HdinferError,
    NotSpdError,
    RankDeficiencyError,
    ValidationError,
)
from .inference import InferenceConfig, build_report
from .oracle import (
    MODEL_IDS,
    make_model,
    population_beta_mc,
    population_projection_analytic,
    sparsity_curve,
)
from .rng import RngState
from .simharness import make_scenario, run_scenario, sparsity_figure_data
from .solvers import basis_pursuit

_EXIT_OK = 0
_EXIT_VALIDATION = 2
_EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdinfer",
        description="De-sparsified Lasso inference and coverage experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags win on conflict")
        p.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
        p.add_argument("--out", default=None, help="output path (or prefix)")

    p = sub.add_parser("infer", help="confidence intervals for one dataset")
    common(p)
    p.add_argument("--design", default=None, help="design matrix CSV")
    p.add_argument("--response", default=None, help="response vector CSV")
    p.add_argument("--variance", default=None, choices=["sandwich", "classic"])
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="Lasso penalty (standardized problem); default: CV")
    p.add_argument("--lambda-x", dest="lambda_x", type=float, default=None,
                   help="nodewise penalty; default: CV on one random column")
    p.add_argument("--method", default=None, choices=["lasso", "sqrt-lasso"])
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--grid-size", dest="grid_size", type=int, default=None)

    p = sub.add_parser("simulate", help="Monte-Carlo coverage experiment")
    common(p)
    p.add_argument("--model", default=None, choices=list(MODEL_IDS))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--design", default=None, choices=["random", "fixed"])
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--variance", default=None, choices=["sandwich", "classic"])
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--fixed-design-seed", dest="fixed_design_seed", type=int,
                   default=None)
    p.add_argument("--method", default=None, choices=["lasso", "sqrt-lasso"])
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--grid-size", dest="grid_size", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker budget for replicates (default: cpu count)")

    p = sub.add_parser("oracle", help="population projection coefficients")
    common(p)
    p.add_argument("--model", default=None, choices=list(MODEL_IDS))
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--draws", type=int, default=None,
                   help="Monte-Carlo draws (ignored with --analytic)")
    p.add_argument("--analytic", action="store_true",
                   help="exact solve from closed-form covariances")

    p = sub.add_parser("basis-pursuit", help="minimum-l1 solution of X beta = f")
    common(p)
    p.add_argument("--design", default=None, help="design matrix CSV (n <= p)")
    p.add_argument("--target", default=None, help="target vector CSV")

    p = sub.add_parser("sparsity-curve", help="weak-sparsity curve data")
    common(p)
    p.add_argument("--beta", default=None, help="coefficient vector CSV")
    p.add_argument("--model", default=None, choices=list(MODEL_IDS))
    p.add_argument("--design", default=None, choices=["random", "fixed"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Start from parsed flags, fill unset ones from the config file."""
    merged = vars(args).copy()
    path = merged.pop("config", None)
    if path is None:
        return merged
    try:
        with open(path, "r") as handle:
            doc = loads_json(handle.read())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config file must hold a JSON object")
    known = {k for k in merged if k != "command"}
    for key, value in doc.items():
        name = key.replace("-", "_")
        if name not in known:
            raise ValidationError(f"unknown config key {key!r}")
        if merged[name] is None or merged[name] is False:
            merged[name] = value
    return merged


def _require(cfg: dict, *names):
    for name in names:
        if cfg.get(name) is None:
            raise ValidationError(f"--{name.replace('_', '-')} is required")


def _default(cfg: dict, name, value):
    if cfg.get(name) is None:
        cfg[name] = value
    return cfg[name]


def _write_log(out_path: str, command: str, seed, started: float, extra: str = ""):
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    elapsed = time.perf_counter() - started
    text = (f"command: {command}\nseed: {seed}\nfinished: {stamp}\n"
            f"wall_seconds: {elapsed:.3f}\n")
    if extra:
        text += extra.rstrip() + "\n"
    atomic_write(out_path + ".log", text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_infer(cfg: dict) -> int:
    started = time.perf_counter()
    _require(cfg, "design", "response", "out")
    _default(cfg, "seed", 0)
    _default(cfg, "variance", "sandwich")
    _default(cfg, "alpha", 0.05)
    _default(cfg, "method", "lasso")
    _default(cfg, "folds", 10)
    _default(cfg, "grid_size", 100)

    x = read_matrix_csv(cfg["design"])
    y = read_vector_csv(cfg["response"])
    config = InferenceConfig(
        variance_mode=cfg["variance"],
        alpha=float(cfg["alpha"]),
        lam=cfg.get("lam"),
        lambda_x=cfg.get("lambda_x"),
        method=cfg["method"],
        cv_folds=int(cfg["folds"]),
        grid_size=int(cfg["grid_size"]),
        rng=RngState(int(cfg["seed"])).derive("infer"),
    )
    report = build_report(x, y, config)
    atomic_write(cfg["out"], dumps_json(report_to_doc(report)))
    significant = int((report.p_values < report.alpha).sum())
    print(f"{significant} of {x.shape[1]} coordinates with p < {report.alpha:g}; "
          f"report written to {cfg['out']}")
    _write_log(cfg["out"], "infer", cfg["seed"], started)
    return _EXIT_OK


def _cmd_simulate(cfg: dict) -> int:
    started = time.perf_counter()
    _require(cfg, "model", "n", "p", "design", "replicates", "out")
    _default(cfg, "seed", 0)
    _default(cfg, "alpha", 0.05)
    _default(cfg, "method", "lasso")
    _default(cfg, "folds", 10)
    _default(cfg, "grid_size", 100)
    _default(cfg, "threads", os.cpu_count() or 1)
    if cfg["design"] == "fixed":
        _default(cfg, "fixed_design_seed", int(cfg["seed"]) + 1)

    scenario = make_scenario(
        cfg["model"], int(cfg["n"]), int(cfg["p"]), cfg["design"],
        int(cfg["replicates"]),
        alpha=float(cfg["alpha"]),
        variance_mode=cfg.get("variance"),
        base_seed=int(cfg["seed"]),
        fixed_design_seed=cfg.get("fixed_design_seed"),
        method=cfg["method"],
        cv_folds=int(cfg["folds"]),
        grid_size=int(cfg["grid_size"]),
        workers=int(cfg["threads"]),
    )
    report = run_scenario(scenario)

    out = cfg["out"]
    atomic_write(out + ".json", dumps_json(coverage_to_doc(report)))
    write_per_coordinate_csv(out + "_per_coordinate.csv", report)

    def _fmt(v):
        return "na" if v is None else f"{v:.2f}"

    print(f"{cfg['model']} {_fmt(report.avgcov_s0)} {_fmt(report.avgcov_s0c)} "
          f"{_fmt(report.avglen_s0)} {_fmt(report.avglen_s0c)}")
    _write_log(out, "simulate", cfg["seed"], started,
               extra=f"replicates_used: {report.replicates_used}\n"
                     f"failed_replicates: {report.failed_replicates}\n"
                     f"harness_wall_seconds: {report.wall_time:.3f}")
    if report.invalid:
        print(f"error: more than 5% of replicates failed "
              f"({report.failed_replicates} of {scenario.replicates}); "
              f"report marked invalid", file=sys.stderr)
        return _EXIT_NUMERICAL
    return _EXIT_OK


def _cmd_oracle(cfg: dict) -> int:
    started = time.perf_counter()
    _require(cfg, "model", "out")
    _default(cfg, "seed", 0)
    _default(cfg, "p", 12)
    _default(cfg, "draws", 1_000_000)
    model = make_model(cfg["model"], int(cfg["p"]))
    if cfg.get("analytic"):
        projection = population_projection_analytic(model)
        comment = f"model={cfg['model']} method=analytic"
        write_beta_csv(cfg["out"], projection.beta0, header_comment=comment)
    else:
        projection = population_beta_mc(
            model, RngState(int(cfg["seed"])).derive("oracle"), int(cfg["draws"]))
        comment = (f"model={cfg['model']} method=monte-carlo "
                   f"draws={projection.mc_draws}")
        write_beta_csv(cfg["out"], projection.beta0, mc_se=projection.mc_se,
                       header_comment=comment)
    print(f"beta0 for {cfg['model']} written to {cfg['out']} ({comment})")
    _write_log(cfg["out"], "oracle", cfg["seed"], started)
    return _EXIT_OK


def _cmd_basis_pursuit(cfg: dict) -> int:
    started = time.perf_counter()
    _require(cfg, "design", "target", "out")
    _default(cfg, "seed", 0)
    x = read_matrix_csv(cfg["design"])
    f = read_vector_csv(cfg["target"])
    solution = basis_pursuit(x, f)
    comment = (f"feasibility_gap={solution.feasibility_gap:.6e} "
               f"l1_norm={solution.l1_norm:.17g} iterations={solution.iterations}")
    write_matrix_csv(cfg["out"], solution.beta[:, None], header_comment=comment)
    print(f"basis pursuit solution written to {cfg['out']} ({comment})")
    _write_log(cfg["out"], "basis-pursuit", cfg["seed"], started)
    return _EXIT_OK


def _cmd_sparsity_curve(cfg: dict) -> int:
    started = time.perf_counter()
    _require(cfg, "out")
    _default(cfg, "seed", 0)
    if cfg.get("beta"):
        beta = read_vector_csv(cfg["beta"])
        write_curve_csv(cfg["out"], sparsity_curve(beta))
        print(f"sparsity curve for {cfg['beta']} written to {cfg['out']}")
    elif cfg.get("model"):
        _require(cfg, "design")
        if cfg["design"] == "random":
            _default(cfg, "p", 1000)
            model = make_model(cfg["model"], int(cfg["p"]))
            beta = population_projection_analytic(model).beta0
            write_curve_csv(cfg["out"], sparsity_curve(beta))
            print(f"population sparsity curve for {cfg['model']} "
                  f"written to {cfg['out']}")
        else:
            _require(cfg, "n", "p")
            _default(cfg, "runs", 1)
            scenario = make_scenario(
                cfg["model"], int(cfg["n"]), int(cfg["p"]), "fixed", 1,
                base_seed=int(cfg["seed"]),
                fixed_design_seed=int(cfg["seed"]) + 1,
            )
            curves = sparsity_figure_data(scenario, int(cfg["runs"]))
            write_curves_csv(cfg["out"], curves)
            print(f"{len(curves)} basis-pursuit sparsity curves written "
                  f"to {cfg['out']}")
    else:
        raise ValidationError("sparsity-curve needs either --beta or --model")
    _write_log(cfg["out"], "sparsity-curve", cfg["seed"], started)
    return _EXIT_OK


_COMMANDS = {
    "infer": _cmd_infer,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
    "basis-pursuit": _cmd_basis_pursuit,
    "sparsity-curve": _cmd_sparsity_curve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return _EXIT_OK if exc.code in (0, None) else _EXIT_VALIDATION
    try:
        cfg = _merge_config(args)
        return _COMMANDS[args.command](cfg)
    except (ValidationError, NotSpdError, RankDeficiencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except HdinferError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL


def entrypoint():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
