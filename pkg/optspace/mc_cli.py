"""
Command line interface - ``optspace <command> [options]``.

Commands:
    synth          draw a synthetic instance and write it to a directory
    complete       run OptSpace on a MatrixMarket coordinate file
    theory         print the asymptotic predictions for a parameter set
    sweep          run an experiment configuration (yaml or key=value file)
    select-lambda  choose lambda on a holdout split of a MatrixMarket coordinate file

Exit codes: 0 success, 2 usage / invalid argument, 3 dimension, 4 convergence, 5 theory, 6 experiment, 7 I/O.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from optspace import mc_harness, mc_theory
from optspace.formats import mm_format
from optspace.mc_errors import EXIT_CODES, McError
from optspace.mc_manifold import DescentOptions
from optspace.mc_obsmat import read_observed
from optspace.mc_spectral import provenance_hash, reconstruct, save_factorization
from optspace.mc_synth import generate, generate_spiked, save_instance, snr_to_sigma2, train_error
from optspace.mc_utils import fmt_float, logger, set_logger


def _floats(text: str) -> List[float]:
    """Comma or semicolon separated floats."""
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _lambda_arg(text: str) -> Optional[float]:
    return None if text == "auto" else float(text)


def _add_descent_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rank", type=int, required=True, help="rank of the reconstruction")
    parser.add_argument("--max-iters", type=int, default=500, help="descent iteration budget")
    parser.add_argument("--trim-factor", type=float, default=2.0, help="trimming threshold in average degrees")
    parser.add_argument("--holdout-fraction", type=float, default=0.2, help="validation share for lambda selection")
    parser.add_argument("--seed", type=int, required=True, help="seed of the SVD start and the holdout split")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optspace", description="Regularized OptSpace matrix completion.")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR, leaves logging untouched if omitted")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="write a synthetic instance to a directory")
    synth.add_argument("--m", type=int, required=True)
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--r", type=int, help="rank of M (recipe instances)")
    synth.add_argument("--sigma-diag", type=_floats, help="prescribed normalized spectrum (spiked instances)")
    noise = synth.add_mutually_exclusive_group(required=True)
    noise.add_argument("--sigma2", type=float)
    noise.add_argument("--snr", type=float)
    synth.add_argument("--p", type=float, required=True, help="observation probability")
    synth.add_argument("--mask", choices=("bernoulli", "fixed"), default="bernoulli")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--out", required=True, help="output directory")
    synth.set_defaults(handler=cmd_synth)

    complete = commands.add_parser("complete", help="run OptSpace on a MatrixMarket coordinate file")
    complete.add_argument("input", help="observed entries, MatrixMarket coordinate")
    _add_descent_args(complete)
    complete.add_argument("--lambda", dest="lam", type=_lambda_arg, default=0.0, help="spectral lambda or auto")
    complete.add_argument("--lambda-descent", type=float, help="descent lambda, defaults to max(lambda, 0)")
    complete.add_argument("--out", required=True, help="factorization directory")
    complete.add_argument("--estimate", help="also write X S Y^T as a MatrixMarket array")
    complete.add_argument("--trace", help="write the descent trace CSV")
    complete.add_argument(
        "--require-convergence", action="store_true", help="fail with exit code 4 when the descent does not converge"
    )
    complete.set_defaults(handler=cmd_complete)

    theory = commands.add_parser("theory", help="print the asymptotic predictions")
    theory.add_argument("--sigma-diag", type=_floats, required=True)
    theory.add_argument("--sigma2", type=float, required=True)
    theory.add_argument("--p", type=float, required=True)
    theory.add_argument("--alpha", type=float, default=1.0)
    theory.add_argument("--rank-used", type=int, help="rank of the shrunk estimate, defaults to the model rank")
    theory.set_defaults(handler=cmd_theory)

    sweep = commands.add_parser("sweep", help="run an experiment configuration")
    sweep.add_argument("config", help="experiment file (.yaml/.yml or key=value .cfg/.conf/.txt)")
    sweep.add_argument("--seed", type=int, required=True, help="base seed, overrides the configuration")
    sweep.add_argument("--out", help="output prefix, defaults to the configured output without suffix")
    sweep.add_argument("--replicates", type=int)
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--max-iters", type=int)
    sweep.add_argument("--timing", action="store_true", help="add the wall_time column")
    sweep.set_defaults(handler=cmd_sweep)

    select = commands.add_parser("select-lambda", help="choose lambda on a holdout split")
    select.add_argument("input", help="observed entries, MatrixMarket coordinate")
    _add_descent_args(select)
    select.add_argument("--lambdas", type=_floats, help="candidate grid, defaults to the theory based grid")
    select.add_argument("--sigma-diag", type=_floats, help="model spectrum for the default grid")
    select.add_argument("--sigma2", type=float, help="model noise scale for the default grid")
    select.add_argument("--p", type=float, help="observation probability for the default grid")
    select.set_defaults(handler=cmd_select_lambda)
    return parser


def cmd_synth(args: argparse.Namespace) -> None:
    if (args.r is None) == (args.sigma_diag is None):
        raise ValueError("Give exactly one of --r and --sigma-diag")
    signal = args.r if args.r is not None else sum(s**2 for s in args.sigma_diag)
    sigma2 = args.sigma2 if args.sigma2 is not None else snr_to_sigma2(args.snr, signal, args.m, args.n)
    if args.sigma_diag is not None:
        instance = generate_spiked(args.m, args.n, args.sigma_diag, sigma2, args.p, args.seed, args.mask)
    else:
        instance = generate(args.m, args.n, args.r, sigma2, args.p, args.seed, args.mask)
    save_instance(instance, args.out)
    print(f"{args.out}: {instance.m}x{instance.n} rank {instance.r}, {instance.observed.nnz} observed entries")


def _options(args: argparse.Namespace) -> DescentOptions:
    return DescentOptions(max_iters=args.max_iters)


def cmd_complete(args: argparse.Namespace) -> None:
    obs = read_observed(args.input)
    lam = args.lam
    if lam is None:
        lam, _ = mc_harness.select_lambda(
            obs, args.rank, None, args.holdout_fraction, args.seed, _options(args), trim_factor=args.trim_factor
        )
    opts = replace(_options(args), require_convergence=args.require_convergence)
    factorization, trace = mc_harness.run_optspace(obs, args.rank, lam, args.lambda_descent, opts, args.trim_factor, args.seed)
    provenance = provenance_hash(obs, rank=args.rank, lam=lam, max_iters=args.max_iters, seed=args.seed)
    save_factorization(factorization, args.out, lam, provenance)
    estimate = reconstruct(factorization)
    if args.estimate:
        mm_format.write_array(args.estimate, estimate)
    if args.trace:
        trace.to_csv(args.trace)
    print(f"lambda={fmt_float(lam)}")
    print(f"reason={trace.reason}")
    print(f"iterations={max(len(trace.records) - 1, 0)}")
    print(f"train_error={fmt_float(train_error(obs, estimate))}")


def cmd_theory(args: argparse.Namespace) -> None:
    params = mc_theory.ModelParams(tuple(args.sigma_diag), args.sigma2, args.p, args.alpha)
    pairs = mc_theory.predict(params, args.rank_used).as_pairs()
    for key, value in pairs:
        print(f"{key}={value}")
    print(",".join(key for key, _ in pairs))
    print(",".join(f'"{value}"' if ";" in value else value for _, value in pairs))


def cmd_sweep(args: argparse.Namespace) -> None:
    config = mc_harness.load_config(args.config)
    overrides = {"seed": args.seed}
    for name in ("replicates", "workers", "max_iters"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    config = replace(config, **overrides)
    prefix = Path(args.out) if args.out else Path(config.output).with_suffix("")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    results = Path(f"{prefix}.csv")
    summary = Path(f"{prefix}_summary.csv")
    rows = mc_harness.run(config, results, include_timing=args.timing)
    mc_harness.emit_summary_csv(rows, summary)
    mc_harness.emit_plotscript(rows, Path(f"{prefix}.gp"), summary)
    failed = sum(row.status != "ok" for row in rows)
    print(f"{results}: {len(rows)} rows, {failed} failed")


def cmd_select_lambda(args: argparse.Namespace) -> None:
    obs = read_observed(args.input)
    params = None
    if args.sigma_diag is not None:
        if args.sigma2 is None or args.p is None:
            raise ValueError("--sigma-diag needs --sigma2 and --p")
        params = mc_theory.ModelParams(tuple(args.sigma_diag), args.sigma2, args.p, obs.m / obs.n)
    lam, table = mc_harness.select_lambda(
        obs, args.rank, args.lambdas, args.holdout_fraction, args.seed, _options(args), params, args.trim_factor
    )
    print("lambda,holdout_error")
    for candidate, score in table:
        print(f"{fmt_float(candidate)},{fmt_float(score)}")
    print(f"lambda_star={fmt_float(lam)}")


def exit_code(exc: BaseException) -> int:
    """Documented exit code of an exception raised by a command."""
    if isinstance(exc, McError):
        return exc.exit_code
    if isinstance(exc, ValueError):
        return EXIT_CODES["usage"]
    if isinstance(exc, OSError):
        return EXIT_CODES["io"]
    return EXIT_CODES["error"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.log_level:
            set_logger(args.log_level.upper())
        args.handler(args)
    except (McError, ValueError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_CODES["success"]


if __name__ == "__main__":
    sys.exit(main())
