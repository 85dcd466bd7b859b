"""
Command-line front end.

Subcommands:
    simulate        Monte Carlo grid over the Gaussian designs
    estimate        sample-split estimate with a 95% interval on a CSV dataset
    transfer-bench  subpopulation-shift benchmark of the six trainers
    el-compare      Monte Carlo grid fitted by both tilt fitters, side by side

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd

from ..core.dataset import load_csv
from ..core.errors import TiltBenchError
from ..core.estimators import Estimand, MeanFunctional, Method, estimate_with_ci
from ..core.features import FeatureMap
from ..core.synthetic import Fitter, run_monte_carlo
from ..core.transfer import run_benchmark
from ..utils.config import RunConfig
from ..utils.logger import log_error, log_info, log_system_info, setup_logger, timed
from ..utils.reporting import (
    compare_fitters,
    human_table,
    summarize_estimates,
    to_json,
    trace_frame,
    write_csv,
    write_json,
)

ESTIMATE_COLUMNS = ["kind", "sigma1", "rep", "estimand", "method", "point"]


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, metavar="FILE", help="INI file with run settings")
    parent.add_argument("--seed", type=int, help="master seed (default: 0)")
    parent.add_argument("--out", type=str, metavar="DIR", help="output directory (default: out)")
    parent.add_argument("--threads", type=int, help="worker threads, capped by TILTBENCH_THREADS")
    parent.add_argument("--quiet", "-q", action="store_true", help="only warnings on the console")
    return parent


def _grid_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kind", help="well, miss or both (default: well)")
    parser.add_argument("--sigma1", help="comma-separated sigma1 grid (default: 0.75,1.0,1.25,1.5)")
    parser.add_argument("--reps", type=int, help="replications per cell (default: 50)")
    parser.add_argument("--n", type=int, help="estimation sample size (default: 400)")
    parser.add_argument("--classifier-n", type=int, help="eta1 training sample size (default: 200)")
    parser.add_argument("--max-iter", type=int, help="tilt fitter iteration cap (default: 4000)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiltbench",
        description="Exponential tilt estimation for outcomes missing not at random",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    python main.py simulate --kind well --sigma1 1.0 --reps 5 --seed 7
    python main.py estimate --data data.csv --tau y --method dr --estimand mu0
    python main.py transfer-bench --repeats 3 --seed 1
    python main.py el-compare --reps 10
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parent = _common_parent()

    sim = sub.add_parser("simulate", parents=[parent], help="Monte Carlo grid over the Gaussian designs")
    _grid_arguments(sim)
    sim.add_argument("--fitter", choices=[f.value for f in Fitter], help="tilt fitter (default: exp_grad)")

    est = sub.add_parser("estimate", parents=[parent], help="sample-split estimate on a CSV dataset")
    est.add_argument("--data", type=str, help="CSV with header x1,...,xd,y,r")
    est.add_argument("--tau", help="functional: y, one, x<k> or y*x<k> (default: y)")
    est.add_argument("--method", type=str.lower, choices=["iw", "ipw", "dr", "or"], help="estimator (default: dr)")
    est.add_argument("--estimand", type=str.lower, choices=["mu", "mu0"], help="target (default: mu0)")
    est.add_argument("--split", type=float, help="fraction of rows used for nuisance fits (default: 0.5)")
    est.add_argument("--degree", type=int, help="polynomial degree of the tilt statistic (default: 1)")
    est.add_argument("--lenient", action="store_true", help="zero outcomes given on r=0 rows instead of failing")
    est.add_argument("--trace", action="store_true", help="write the tilt fitter trace to trace.csv")

    tb = sub.add_parser("transfer-bench", parents=[parent], help="subpopulation-shift benchmark")
    tb.add_argument("--repeats", type=int, help="repeats over target splits (default: 20)")
    tb.add_argument("--d", type=int, help="embedding dimension (default: 10)")
    tb.add_argument("--n-source", type=int, help="source sample size (default: 2000)")
    tb.add_argument("--n-target", type=int, help="target sample size (default: 2000)")
    tb.add_argument("--ridge", type=float, help="ridge strength of the six trainers (default: 1e-3)")

    el = sub.add_parser("el-compare", parents=[parent], help="exponentiated gradient vs empirical likelihood")
    _grid_arguments(el)
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    """Load the config file, then apply the flags that were given."""
    config = RunConfig.load(args.config)
    config.override("run", seed=args.seed, out=args.out, threads=args.threads)
    if args.command in ("simulate", "el-compare"):
        config.override(
            "simulate", kind=args.kind, sigma1=args.sigma1, reps=args.reps, n=args.n,
            classifier_n=args.classifier_n, fitter=getattr(args, "fitter", None),
        )
        config.override("tilt", max_iter=args.max_iter)
    elif args.command == "estimate":
        config.override(
            "estimate", data=args.data, tau=args.tau, method=args.method,
            estimand=args.estimand, split=args.split, strict=False if args.lenient else None,
        )
        config.override("tilt", degree=args.degree)
    elif args.command == "transfer-bench":
        config.override(
            "transfer", repeats=args.repeats, d=args.d, n_source=args.n_source,
            n_target=args.n_target, ridge=args.ridge,
        )
    return config


@timed
def cmd_simulate(args: argparse.Namespace, config: RunConfig) -> int:
    mc = config.monte_carlo_config()
    result = run_monte_carlo(mc, config.threads)
    frame = result.to_frame()
    out = config.out_dir
    write_csv(frame[ESTIMATE_COLUMNS], out / "estimates.csv")
    truth = {k.value: v for k, v in mc.designs()[0].true_means().items()}
    summary = summarize_estimates(frame, truth)
    write_csv(summary, out / "summary.csv")
    if result.failures:
        write_json([vars(f) for f in result.failures], out / "failures.json")
        log_error(f"{len(result.failures)} replication(s) failed; see failures.json")
    print(human_table(summary))
    return 0


@timed
def cmd_estimate(args: argparse.Namespace, config: RunConfig) -> int:
    data_path = config.get("estimate", "data")
    if not data_path:
        raise TiltBenchError("estimate needs --data or [estimate] data")
    dataset = load_csv(data_path, strict=config.get("estimate", "strict"))
    dataset.require_both_arms()

    degree = int(config.get("tilt", "degree"))
    fm = FeatureMap.identity(dataset.d) if degree == 1 else FeatureMap.polynomial(dataset.d, degree)
    tau = MeanFunctional.parse(config.get("estimate", "tau"))
    method = Method.parse(config.get("estimate", "method"))
    estimand = Estimand(config.get("estimate", "estimand"))
    report = estimate_with_ci(
        dataset, fm, tau, method, estimand,
        split_fraction=config.get("estimate", "split"),
        seed=config.seed,
        classifier=config.classifier_config(),
        tilt=config.tilt_config(record_trace=args.trace),
    )

    out = config.out_dir
    payload = report.to_dict()
    payload["seed"] = config.seed
    if report.tilt_fit is not None:
        payload["tilt"] = report.tilt_fit.to_dict()
        if args.trace:
            write_csv(trace_frame(report.tilt_fit.trace), out / "trace.csv")
    write_json(payload, out / "estimate.json")
    row = pd.DataFrame(
        [(estimand.value, method.value, config.seed, report.point, report.std_error, *report.ci95)],
        columns=["estimand", "method", "seed", "point", "std_error", "ci_lo", "ci_hi"],
    )
    write_csv(row, out / "estimates.csv")
    print(to_json(payload))
    return 0


@timed
def cmd_transfer_bench(args: argparse.Namespace, config: RunConfig) -> int:
    result = run_benchmark(
        design=config.shift_design(),
        tilt=config.tilt_config(),
        classifier=config.classifier_config(),
        ridge_lambda=config.get("transfer", "ridge"),
        repeats=config.get("transfer", "repeats"),
        max_workers=config.threads,
    )
    out = config.out_dir
    write_csv(result.accuracy_frame(), out / "accuracy.csv")
    write_csv(result.mcv_frame(), out / "mcv.csv")
    summary = result.summary()
    write_json(summary, out / "summary.json")
    if result.failures:
        log_error(f"{len(result.failures)} repeat(s) failed")
    for name, stats in {**summary["trainers"], **summary["mcv"]}.items():
        print(f"{name:>10}  {stats['mean']:.4f} +- {stats['sd']:.4f}  ({stats['repeats']} repeats)")
    return 0


@timed
def cmd_el_compare(args: argparse.Namespace, config: RunConfig) -> int:
    frames = []
    failures = 0
    for fitter in (Fitter.EXP_GRAD, Fitter.EL):
        mc = config.monte_carlo_config(fitter)
        result = run_monte_carlo(mc, config.threads)
        failures += len(result.failures)
        frames.append(result.to_frame())
    frame = pd.concat(frames, ignore_index=True)
    truth = {k.value: v for k, v in mc.designs()[0].true_means().items()}
    summary = summarize_estimates(frame, truth, by=("kind", "sigma1", "estimand", "method", "fitter"))
    comparison = compare_fitters(summary)

    out = config.out_dir
    write_csv(frame[ESTIMATE_COLUMNS + ["fitter"]], out / "estimates.csv")
    write_csv(summary, out / "summary.csv")
    write_csv(comparison, out / "comparison.csv")
    if failures:
        log_error(f"{failures} replication(s) failed across both fitters")
    print(human_table(comparison))
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "transfer-bench": cmd_transfer_bench,
    "el-compare": cmd_el_compare,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        config = _resolve(args)
        out = config.out_dir
        out.mkdir(parents=True, exist_ok=True)
        setup_logger(
            log_dir=str(out / "logs"),
            console_level=logging.WARNING if args.quiet else logging.INFO,
        )
        log_system_info()
        config.write_resolved(out)
        log_info(f"command {args.command} started (seed={config.seed}, out={out})")
        code = COMMANDS[args.command](args, config)
        log_info(f"command {args.command} finished with exit code {code}")
        return code
    except (TiltBenchError, OSError, ValueError) as e:
        log_error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
