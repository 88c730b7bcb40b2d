"""Command line interface.

Subcommands: simulate, fit, impute, tune, benchmark.  A JSON config file can
supply any long-flag value (keys use underscores); explicit flags override
the config.  Exit codes: 0 success, 2 usage problems, 3 data problems,
4 numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import io as mio
from .benchmark import METHODS, run_benchmark, tune_benchmark_taus
from .dataset import MixedDataset
from .errors import (ColumnEmpty, DegenerateTruth, DesignError, DomainError,
                     FoldError, InvalidInput, NumericalFailure, SchemaViolation,
                     ShapeError, StratumTooSmall, SurveyMCError, WeightError)
from .families import CategoryLayout, mean_from_natural
from .response_model import estimate_response_probs
from .simulator import PopulationSpec, simulate_survey
from .solver import SolverConfig, fit_completion, tune_tau

_USAGE_ERRORS = (InvalidInput,)
_DATA_ERRORS = (SchemaViolation, WeightError, ColumnEmpty, StratumTooSmall,
                DesignError, DegenerateTruth, ShapeError, FoldError, OSError)
_NUMERICAL_ERRORS = (NumericalFailure, DomainError)


def _parse_blocks(text: str, sigma: float) -> CategoryLayout:
    specs = []
    for token in text.split(","):
        token = token.strip()
        try:
            kind, count = token.split(":")
            specs.append((kind.strip(), int(count)))
        except ValueError as exc:
            raise InvalidInput(f"bad block token {token!r}, expected family:count") from exc
    return CategoryLayout.of(*specs, sigma=sigma)


def _spec_from_args(args) -> PopulationSpec:
    return PopulationSpec(n_strata=args.strata, m1=args.m1, m2=args.m2,
                          layout=_parse_blocks(args.blocks, args.sigma),
                          xi=args.xi, n_covariates=args.covariates)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(tau=args.tau, iterations=args.iterations,
                        step_mode=args.step_mode, step_size=args.step_size,
                        population_size=args.population_size, clamp=args.clamp)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _meta(args, extra: dict | None = None) -> dict:
    doc = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    doc.update(extra or {})
    return doc


def _load(args) -> MixedDataset:
    return mio.load_dataset(args.data, args.schema, standardize=args.standardize)


def _fit(args, dataset: MixedDataset):
    probs = estimate_response_probs(dataset, p_floor=args.p_floor,
                                    use_design_weights=args.design_weighted)
    result = fit_completion(dataset, probs, _solver_config(args))
    return probs, result


def cmd_simulate(args) -> int:
    out = _outdir(args)
    spec = _spec_from_args(args)
    _, sample = simulate_survey(spec, np.random.default_rng(args.seed))
    mio.save_dataset(sample.dataset, os.path.join(out, "data.csv"),
                     os.path.join(out, "schema.json"))
    mio.save_matrix_csv(sample.truth_Z, os.path.join(out, "truth_z.csv"), prefix="z")
    mio.save_matrix_csv(sample.true_p, os.path.join(out, "truth_p.csv"), prefix="p")
    mio.write_meta_json(_meta(args, {"n_rows": sample.dataset.n,
                                     "response_rate": float(sample.dataset.R.mean())}),
                        os.path.join(out, "meta.json"))
    print(f"wrote {sample.dataset.n} rows to {out}")
    return 0


def cmd_fit(args) -> int:
    out = _outdir(args)
    dataset = _load(args)
    probs, result = _fit(args, dataset)
    mio.save_matrix_csv(result.Z_hat, os.path.join(out, "z_hat.csv"), prefix="z")
    mio.save_matrix_csv(probs.p_hat, os.path.join(out, "p_hat.csv"), prefix="p")
    mio.write_trace_csv(result, os.path.join(out, "trace.csv"))
    mio.write_meta_json(_meta(args, {"diagnostics": result.diagnostics,
                                     "iterations_run": result.iterations_run}),
                        os.path.join(out, "meta.json"))
    print(f"final objective {mio.fmt(result.objective_trace[-1])} after "
          f"{result.iterations_run} iterations")
    return 0


def cmd_impute(args) -> int:
    out = _outdir(args)
    dataset = _load(args)
    probs, result = _fit(args, dataset)
    means = mean_from_natural(result.Z_hat, dataset.layout)
    imputed = np.where(dataset.R, dataset.Y, means)
    if args.original_scale and dataset.standardization is not None:
        imputed = imputed.copy()
        for j, (mean, scale) in dataset.standardization.response.items():
            imputed[:, j] = imputed[:, j] * scale + mean
    mio.save_matrix_csv(imputed, os.path.join(out, "imputed.csv"), prefix="y")
    mio.save_matrix_csv(result.Z_hat, os.path.join(out, "z_hat.csv"), prefix="z")
    mio.write_trace_csv(result, os.path.join(out, "trace.csv"))
    mio.write_meta_json(_meta(args, {"diagnostics": result.diagnostics}),
                        os.path.join(out, "meta.json"))
    print(f"imputed {int((~dataset.R).sum())} missing entries")
    return 0


def cmd_tune(args) -> int:
    out = _outdir(args)
    dataset = _load(args)
    probs = estimate_response_probs(dataset, p_floor=args.p_floor,
                                    use_design_weights=args.design_weighted)
    grid = mio.parse_tau_grid(args.grid)
    base = SolverConfig(tau=grid[0], iterations=args.iterations,
                        step_mode=args.step_mode, step_size=args.step_size,
                        population_size=args.population_size, clamp=args.clamp)
    result = tune_tau(dataset, probs, grid=grid,
                      protocol={"kind": "k_fold", "k": args.folds, "seed": args.seed},
                      base_config=base)
    with open(os.path.join(out, "tau_scores.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "score"])
        for t, s in zip(result.taus, result.scores):
            writer.writerow([mio.fmt(t), mio.fmt(s)])
    mio.write_meta_json(_meta(args, {"best_tau": result.best_tau}),
                        os.path.join(out, "meta.json"))
    print(f"best tau {mio.fmt(result.best_tau)}")
    return 0


def cmd_benchmark(args) -> int:
    out = _outdir(args)
    spec = _spec_from_args(args)
    methods = tuple(m.strip() for m in args.methods.split(","))
    config = SolverConfig(tau=2.0**-10, iterations=args.iterations,
                          step_mode=args.step_mode, step_size=args.step_size,
                          clamp=args.clamp)
    if args.tau is not None:
        taus = {m: args.tau for m in methods}
    else:
        taus = tune_benchmark_taus(spec, methods, grid=mio.parse_tau_grid(args.grid),
                                   base_seed=args.seed, config=config,
                                   p_floor=args.p_floor)
    summary = run_benchmark(spec, methods, n_replicates=args.replicates, taus=taus,
                            base_seed=args.seed, config=config, p_floor=args.p_floor,
                            threads=args.threads)
    scenario = f"xi={args.xi:g}"
    mio.write_benchmark_csvs(summary, scenario, os.path.join(out, "summary.csv"),
                             os.path.join(out, "replicates.csv"))
    mio.write_meta_json(_meta(args, {"taus": taus, "n_failures": summary.n_failures}),
                        os.path.join(out, "meta.json"))
    for method in methods:
        agg = summary.aggregate.get(method, {})
        if "overall" in agg:
            mean, se, count = agg["overall"]
            print(f"{method}: overall RE {mean:.4f} +/- {se:.4f} ({count} replicates)")
        else:
            print(f"{method}: all replicates failed")
    return 0


def _add_solver_flags(p: argparse.ArgumentParser, tau_required: bool) -> None:
    p.add_argument("--tau", type=float, required=tau_required, default=None,
                   help="nuclear-norm weight")
    p.add_argument("--iterations", type=int, default=200, help="solver iterations")
    p.add_argument("--step-mode", choices=["standard_prox", "as_printed"],
                   default="standard_prox")
    p.add_argument("--step-size", type=float, default=None,
                   help="fixed step size (default: automatic)")
    p.add_argument("--clamp", type=float, default=30.0,
                   help="natural-parameter clamp box half-width")
    p.add_argument("--population-size", type=float, default=None,
                   help="population size N (default: stored or Horvitz-Thompson)")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--schema", required=True, help="schema JSON")
    p.add_argument("--standardize", action="store_true",
                   help="standardize covariates and gaussian responses at load")
    p.add_argument("--p-floor", type=float, default=0.01,
                   help="lower clamp for fitted response probabilities")
    p.add_argument("--design-weighted", action="store_true",
                   help="use 1/pi weights when fitting response probabilities")


def _add_design_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strata", type=int, default=9, help="number of strata H")
    p.add_argument("--m1", type=int, default=5, help="clusters drawn per stratum")
    p.add_argument("--m2", type=int, default=20, help="elements drawn per cluster")
    p.add_argument("--covariates", type=int, default=3, help="covariate count D")
    p.add_argument("--blocks", default="gaussian:30,poisson:30,bernoulli:30",
                   help="response blocks as family:count, comma separated")
    p.add_argument("--sigma", type=float, default=1.0, help="gaussian scale")
    p.add_argument("--xi", type=float, default=0.3,
                   help="missingness intercept location")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surveymc",
        description="Low-rank completion of mixed survey responses under "
                    "informative sampling.")
    parser.add_argument("--config", default=None,
                        help="JSON file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic survey sample")
    _add_design_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the completion model to a dataset")
    _add_data_flags(p)
    _add_solver_flags(p, tau_required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("impute", help="fit and write mean-scale imputations")
    _add_data_flags(p)
    _add_solver_flags(p, tau_required=True)
    p.add_argument("--original-scale", action="store_true",
                   help="undo load-time standardization in the imputed file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("tune", help="cross-validate tau on a dataset")
    _add_data_flags(p)
    p.add_argument("--grid", default="2^-15..2^-1,1,2", help="tau grid")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="fold assignment seed")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--step-mode", choices=["standard_prox", "as_printed"],
                   default="standard_prox")
    p.add_argument("--step-size", type=float, default=None)
    p.add_argument("--clamp", type=float, default=30.0)
    p.add_argument("--population-size", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("benchmark", help="Monte Carlo method comparison")
    _add_design_flags(p)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tau", type=float, default=None,
                   help="fixed tau for every method (default: tune on a "
                        "validation replicate)")
    p.add_argument("--grid", default="2^-15..2^-1,1,2", help="tuning grid")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--step-mode", choices=["standard_prox", "as_printed"],
                   default="standard_prox")
    p.add_argument("--step-size", type=float, default=None)
    p.add_argument("--clamp", type=float, default=30.0)
    p.add_argument("--p-floor", type=float, default=0.01)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold config-file values in as defaults by injecting them before argv.

    Explicit flags win because argparse takes the last occurrence.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise InvalidInput("--config needs a path")
    path = argv[i + 1]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInput("config file must hold a JSON object")
    injected: list[str] = []
    for key, value in doc.items():
        flag = "--" + str(key).replace("_", "-")
        if isinstance(value, bool):
            if value:
                injected.append(flag)
        else:
            injected.extend([flag, str(value)])
    head = argv[:i] + argv[i + 2:]
    if not head:
        raise InvalidInput("config file cannot supply the subcommand")
    # injected defaults go right after the subcommand name
    return head[:1] + injected + head[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except SurveyMCError as exc:  # any remaining package error is a data problem
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
