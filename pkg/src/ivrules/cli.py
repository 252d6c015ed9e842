"""Command-line front end: ``ivrules <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 invalid model or dataset,
3 numerical failure (weak instrument, missing arm or infeasible LP in
``--strict`` mode).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, bounds, estimator, model as model_core, sampler
from .errors import NumericalError, ValidationError

DEFAULT_SEED = 20200928

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _eps_grid(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    return values


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ivrules", description="Optimal treatment regimes with a binary instrument.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, help_, *flags):
        sp = sub.add_parser(name, help=help_)
        for f in flags:
            f(sp)
        return sp

    def model_flag(required=True):
        return lambda sp: sp.add_argument("--model", type=Path, required=required)

    def data_flag(required=True):
        return lambda sp: sp.add_argument("--data", type=Path, required=required)

    def out(sp):
        sp.add_argument("--out", type=Path)

    def seed(sp):
        sp.add_argument("--seed", type=_seed, default=DEFAULT_SEED)

    def n(sp):
        sp.add_argument("--n", type=_positive, required=True)

    def reps(sp):
        sp.add_argument("--reps", type=_positive, default=100)

    def objective(sp):
        sp.add_argument("--objective", choices=("id1", "id2"), default="id1")

    def estimator_flags(sp):
        sp.add_argument("--min-arm-count", type=_positive, default=estimator.DEFAULT_MIN_ARM_COUNT)
        sp.add_argument("--strict", action="store_true")

    def threads(sp):
        sp.add_argument("--threads", type=_positive, default=1)

    def tol(sp):
        sp.add_argument("--tol", type=float, default=model_core.DEFAULT_TOL)

    add("simulate", "sample a dataset CSV from a model", model_flag(), n, seed, out)
    est = add("estimate", "fit the regime maximizing a sample objective",
              data_flag(), objective, estimator_flags, out)
    est.add_argument("--delta", type=_eps_grid,
                     help="known instrument strength per cell; the treatment column is then unused")
    add("check", "assumption diagnostics of a model", model_flag(), tol, out)
    b = add("bounds", "sharp counterfactual-mean bounds", model_flag(False), data_flag(False), out)
    b.add_argument("--strict", action="store_true")
    add("regret", "Monte Carlo regret of the fitted regime", model_flag(), objective, n, reps,
        seed, estimator_flags, threads, out)
    sw = add("sweep", "regret under increasing assumption violation", model_flag(), objective,
             n, reps, seed, estimator_flags, threads, out)
    sw.add_argument("--direction", choices=analysis.DIRECTIONS, required=True)
    sw.add_argument("--eps-grid", type=_eps_grid, required=True)
    add("oracle", "population-optimal regimes and values", model_flag(), out)
    return p


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cmd_simulate(args):
    m = model_core.load_model(args.model)
    data = sampler.sample(m, args.n, args.seed)
    _emit(sampler.dumps_csv(data), args.out)
    return f"simulate: {len(data)} rows, {data.cell_count} cells, seed {args.seed}"


def _cmd_estimate(args):
    data = sampler.read_csv(args.data)
    est = estimator.fit_nuisances(data, args.min_arm_count, strict=args.strict, delta=args.delta)
    fit = estimator.argmax_regime(data, est, args.objective, strict=args.strict)
    _emit(fit.to_json(), args.out)
    return f"estimate ({args.objective}): regime {list(fit.regime)}, {len(fit.diagnostics)} cells dropped"


def _cmd_check(args):
    m = model_core.load_model(args.model)
    report = model_core.check_assumptions(m, args.tol)
    _emit(_dumps(report.to_dict()), args.out)
    return f"check: assumption A {'holds' if report.assumption_a_holds else 'fails'}"


def _cmd_bounds(args):
    if (args.model is None) == (args.data is None):
        raise UsageError("bounds: exactly one of --model or --data is required")
    source = model_core.load_model(args.model) if args.model else sampler.read_csv(args.data)
    result = bounds.compute_bounds(source, strict=args.strict)
    _emit(result.to_json(), args.out)
    return f"bounds: maximin regime {list(result.maximin)}"


def _config(args):
    return analysis.EstimatorConfig(min_arm_count=args.min_arm_count, strict=args.strict)


def _cmd_regret(args):
    m = model_core.load_model(args.model)
    s = analysis.regret_experiment(m, args.objective, args.n, args.reps, args.seed,
                                   _config(args), threads=args.threads)
    _emit(s.per_replication_csv(), args.out)
    return (f"regret ({args.objective}): match rate {s.match_rate:.4f}, "
            f"mean regret {s.mean:.6f}, failures {s.failures}")


def _cmd_sweep(args):
    m = model_core.load_model(args.model)
    cfg = analysis.ExperimentConfig(objective=args.objective, n=args.n, reps=args.reps,
                                    master_seed=args.seed, estimator=_config(args),
                                    threads=args.threads)
    rows = analysis.misspecification_sweep(m, args.direction, args.eps_grid, cfg)
    _emit(analysis.sweep_csv(rows), args.out)
    return f"sweep ({args.direction}): {len(rows)} rows"


def _cmd_oracle(args):
    m = model_core.load_model(args.model)
    doc = {"oracle": {}, "cells": []}
    for l in range(m.n_cells):
        doc["cells"].append({
            "cell": l,
            "cate": model_core.population_cate(m, l),
            "delta": model_core.population_delta(m, l),
            "theta_plus": model_core.theta(m, l, 1),
            "theta_minus": model_core.theta(m, l, -1),
        })
    for objective in model_core.OBJECTIVES:
        try:
            regime = model_core.population_argmax(m, objective)
        except NumericalError as exc:
            doc["oracle"][objective] = {"error": str(exc)}
            continue
        doc["oracle"][objective] = {"regime": list(regime),
                                    "value": model_core.regime_value(m, regime)}
    _emit(_dumps(doc), args.out)
    return f"oracle: optimal regime {doc['oracle']['oracle']['regime']}"


COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "check": _cmd_check,
    "bounds": _cmd_bounds,
    "regret": _cmd_regret,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        summary = COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    # summary goes to stderr when the payload itself is on stdout
    print(summary, file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
