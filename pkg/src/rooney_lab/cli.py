"""Command-line entry point: ``rooney-lab <subcommand> [options]``.

Every report is a ``{"command", "config", "results"}`` document printed as
aligned text, ``key,value`` CSV, or JSON (see docs/report.schema.json). The
config block echoes the fully resolved run configuration, and ``--seed`` fixes
every stochastic number, so identical invocations print identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__, estimate, oracle, rooney, simulate, surface
from .errors import (
    DomainError,
    InsufficientConditioningEvents,
    MultiCrossing,
    NumericError,
)

THREADS_ENV = "ROONEY_LAB_THREADS"
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _beta_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or 'inf': {text!r}") from None
    if math.isnan(value):
        raise argparse.ArgumentTypeError("beta cannot be NaN")
    return value


def _threads_arg(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threads must be a positive integer or 'auto', got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return value


def _seed_arg(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def resolve_threads(value) -> int:
    if value is not None:
        return value
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return _threads_arg(env)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{THREADS_ENV}: {exc}") from None
    return 1


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, rooney.Marker):
        return value.value
    return value


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(value, list):
        out.append((prefix, " ".join(repr(v) if isinstance(v, float) else str(v) for v in value)))
    else:
        out.append((prefix, repr(value) if isinstance(value, float) else str(value)))


def render(report: dict, fmt: str) -> str:
    report = _jsonable(report)
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    rows: list[tuple[str, str]] = []
    _flatten("", report, rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        writer.writerows(rows)
        return buf.getvalue()
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


def _report(command, args, results, extra_config=None):
    config = {
        key: value
        for key, value in vars(args).items()
        if key not in ("handler", "command") and value is not None
    }
    config.update(extra_config or {})
    return {"command": command, "version": __version__, "config": config, "results": results}


def _verdict(value: float, tol: float) -> str:
    if rooney.improves(value, tol):
        return "positive expected change"
    if value < 1.0 - tol:
        return "negative expected change"
    return "boundary (phi = 1 within tolerance)"


def cmd_phi(args):
    if args.beta <= 1:
        raise UsageError("--beta must exceed 1 (or be inf)")
    value = rooney.phi_k(args.alpha, args.beta, args.delta, args.k)
    results = {
        "c": rooney.effective_weight(args.alpha, args.beta, args.delta),
        "phi_k": value,
    }
    if args.k == 2:
        results["phi2"] = rooney.phi2(args.alpha, args.beta, args.delta)
    results["infinite_bias_limit"] = rooney.phi_limit(args.alpha, args.delta, args.k)
    results["verdict"] = _verdict(results.get("phi2", value), args.tol)
    return _report("phi", args, results)


def cmd_threshold(args):
    try:
        star = rooney.beta_star(args.alpha, args.delta, args.k)
    except MultiCrossing:
        star = rooney.Marker.MULTI_CROSSING
    results = {
        "beta_star": star,
        "infinite_bias_limit": rooney.phi_limit(args.alpha, args.delta, args.k),
    }
    if isinstance(star, float) and star > 1:
        results["phi_at_beta_star"] = rooney.phi_k(args.alpha, star, args.delta, args.k)
    return _report("threshold", args, results)


def _z(empirical, se, target):
    return (empirical - target) / se if se > 0 else (0.0 if empirical == target else math.inf)


def cmd_simulate(args):
    params = rooney.ModelParams(args.alpha, args.beta, args.delta, args.k, args.n)
    threads = resolve_threads(args.threads)
    try:
        reps = simulate.summarize(params, args.trials, args.estimator, args.seed, threads, args.method)
    except InsufficientConditioningEvents as exc:
        raise InsufficientConditioningEvents(
            f"{exc}; increase --trials, raise --beta or lower --alpha so the rule binds more often"
        ) from None
    k = args.k
    rk, pp, bind, du = reps["rk"], reps["prob_positive"], reps["bind_rate"], reps["utility_change"]
    results = {}
    rk_row = rk.as_dict()
    if k >= 2 and args.beta > 1:
        rk_row["phi_k"] = rooney.phi_k(args.alpha, args.beta, args.delta, k)
    rk_row["exact_finite_n"] = oracle.exact_rk(args.n, k, args.alpha, args.beta, args.delta)
    rk_row["z_vs_exact"] = _z(rk.point_estimate, rk.std_error, rk_row["exact_finite_n"])
    results["rk"] = rk_row

    pp_row = pp.as_dict()
    pp_row["closed_form"] = rooney.prob_positive_given_change(args.alpha, args.beta, args.delta, k)
    pp_row["exact_finite_n"] = oracle.exact_prob_positive_given_change(
        args.n, k, args.alpha, args.beta, args.delta
    )
    pp_row["z_vs_closed_form"] = _z(pp.point_estimate, pp.std_error, pp_row["closed_form"])
    results["prob_positive_given_change"] = pp_row

    bind_row = bind.as_dict()
    bind_row["closed_form"] = rooney.prob_rule_binds(args.alpha, args.beta, args.delta, k)
    bind_row["exact_finite_n"] = oracle.exact_prob_binds(args.n, k, args.alpha, args.beta, args.delta)
    bind_row["z_vs_exact"] = _z(bind.point_estimate, bind.std_error, bind_row["exact_finite_n"])
    results["bind_rate"] = bind_row

    results["utility_change_given_bind"] = du.as_dict()
    return _report(
        "simulate", args, results, {"threads": threads, "n_x": params.n_x, "estimator": rk.estimator_kind}
    )


def cmd_mle(args):
    try:
        history = estimate.read_history(args.history, args.delta)
    except OSError as exc:
        raise OSError(f"cannot read {args.history}: {exc.strerror or exc}") from None
    report = estimate.fit(history)
    results = report.as_dict()
    if report.beta_hat is not None and report.beta_hat < 1:
        results["note"] = "beta_hat < 1: selections favour X, outside the model's beta > 1"
    return _report("mle", args, results)


def _axis(values, lo, hi, points, log):
    if values:
        return tuple(sorted(values))
    if points == 1:
        return (lo,)
    import numpy as np

    grid = np.geomspace(lo, hi, points) if log else np.linspace(lo, hi, points)
    return tuple(grid.tolist())


def cmd_surface(args):
    alphas = _axis(args.alphas, args.alpha_min, args.alpha_max, args.alpha_points, log=True)
    deltas = _axis(args.deltas, args.delta_min, args.delta_max, args.delta_points, log=False)
    threads = resolve_threads(args.threads)
    grid = surface.sweep(alphas, deltas, args.k, threads)
    written = []
    if args.out:
        base = args.out
        kinds = ["gnuplot"] if args.gnuplot else args.grid_format
        for kind in kinds:
            path = base if len(kinds) == 1 else f"{base}.{ 'dat' if kind == 'gnuplot' else kind}"
            surface.write_atomic(path, surface.WRITERS[kind](grid))
            written.append(path)
    results = {
        "cells": len(alphas) * len(deltas),
        "finite_cells": grid.count(float),
        "no_threshold_cells": grid.count(rooney.Marker.NO_THRESHOLD),
        "multi_crossing_cells": grid.count(rooney.Marker.MULTI_CROSSING),
        "max_abs_phi_minus_one": surface.verify_cells(grid),
        "files": written,
    }
    if len(alphas) * len(deltas) == 1:
        results["beta_star"] = grid.cells[0][0]
    return _report("surface", args, results, {"threads": threads})


DEMO_SUPPORT = (1, 5, 9, 13)


def cmd_demo_nonmono(args):
    weights = [1 / len(DEMO_SUPPORT)] * len(DEMO_SUPPORT)
    values = {}
    for b in (1, 2, 3, 4):
        values[f"f({b})"] = simulate.cond_exp_filtered_discrete(DEMO_SUPPORT, weights, b)
    seq = list(values.values())
    drops = [f"f({i + 1}) > f({i + 2})" for i in range(len(seq) - 1) if seq[i] > seq[i + 1]]
    results = {
        "support": list(DEMO_SUPPORT),
        "conditional_expectation": values,
        "decreases": drops,
    }
    return _report("demo-nonmono", args, results)


def cmd_bounded(args):
    if not 0 <= args.bias_scale < 1:
        raise UsageError("--bias-scale must lie in [0, 1): the bias cap must stay below the support maximum")
    model = simulate.BOUNDED_FAMILIES[args.dist](args.bias_scale)
    threads = resolve_threads(args.threads)
    rep = simulate.bounded_experiment(model, args.n, args.trials, args.seed, threads)
    row = rep.as_dict()
    lo, hi = rep.ci()
    row["ci95_excludes_zero"] = lo > 0 or hi < 0
    if args.bias_scale == 0 and args.dist == "uniform":
        row["reference_no_bias"] = 1.0 / (args.n + 1)
    return _report("bounded", args, {"expected_gain_given_G": row}, {"threads": threads})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "csv", "json"), default="text")
    common.add_argument("--seed", type=_seed_arg, default=0, help="64-bit master seed")
    common.add_argument(
        "--threads", type=_threads_arg, default=None,
        help=f"worker threads or 'auto' (fallback: ${THREADS_ENV}, then 1)",
    )

    parser = argparse.ArgumentParser(prog="rooney-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p, n=True, beta=True):
        p.add_argument("--alpha", type=float, required=True, help="X pool size relative to Y pool")
        if beta:
            p.add_argument("--beta", type=_beta_arg, required=True, help="bias multiplier (> 1, or inf)")
        p.add_argument("--delta", type=float, required=True, help="tail parameter; exponent is 1+delta")
        p.add_argument("--k", type=int, default=2, help="number of finalists")
        if n:
            p.add_argument("--n", type=int, required=True, help="Y pool size")

    p = sub.add_parser("phi", parents=[common], help="evaluate phi_k and its verdict")
    model_args(p, n=False)
    p.add_argument("--tol", type=float, default=0.0, help="band around 1 reported as boundary")
    p.set_defaults(handler=cmd_phi)

    p = sub.add_parser("threshold", parents=[common], help="bias level beta* where phi_k crosses 1")
    model_args(p, n=False, beta=False)
    p.set_defaults(handler=cmd_threshold)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo vs closed forms")
    model_args(p)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--estimator", choices=("mean", "median-of-means"), default=None,
                   help="default: median-of-means for delta <= 1, mean otherwise")
    p.add_argument("--method", choices=("topk", "full"), default="topk",
                   help="topk samples only the needed order statistics; full draws every candidate")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("mle", parents=[common], help="estimate beta from a hiring history CSV")
    p.add_argument("history", help="CSV with header year,alpha,n,selected")
    p.add_argument("--delta", type=float, required=True)
    p.set_defaults(handler=cmd_mle)

    p = sub.add_parser("surface", parents=[common], help="sweep beta*(alpha, delta)")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--alphas", type=float, nargs="+", help="explicit alpha axis")
    p.add_argument("--deltas", type=float, nargs="+", help="explicit delta axis")
    p.add_argument("--alpha-min", type=float, default=0.01)
    p.add_argument("--alpha-max", type=float, default=1.0)
    p.add_argument("--alpha-points", type=int, default=40)
    p.add_argument("--delta-min", type=float, default=0.05)
    p.add_argument("--delta-max", type=float, default=4.0)
    p.add_argument("--delta-points", type=int, default=40)
    p.add_argument("--out", help="grid file path (suffixed per format when several are requested)")
    p.add_argument("--grid-format", nargs="+", choices=("csv", "json"), default=["csv"])
    p.add_argument("--gnuplot", action="store_true", help="write a whitespace table for gnuplot instead")
    p.set_defaults(handler=cmd_surface)

    p = sub.add_parser("demo-nonmono", parents=[common], help="E[X | X > beta Y] on {1,5,9,13}")
    p.set_defaults(handler=cmd_demo_nonmono)

    p = sub.add_parser("bounded", parents=[common], help="bounded-support experiment")
    p.add_argument("--dist", choices=sorted(simulate.BOUNDED_FAMILIES), default="uniform")
    p.add_argument("--bias-scale", type=float, required=True, help="b(x) = scale * x, scale < 1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.set_defaults(handler=cmd_bounded)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.handler(args)
    except (UsageError, DomainError) as exc:
        parser.print_usage(sys.stderr)
        print(f"rooney-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except estimate.HistoryParseError as exc:
        print(f"rooney-lab mle: parse error: {args.history}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, NumericError, InsufficientConditioningEvents) as exc:
        print(f"rooney-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(render(report, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
