"""Batch command-line front door.

Verbs:
    abcmc run <config>        execute a sampler, write artifacts
    abcmc validate <config>   parse and validate only, echo resolved config
    abcmc summarise <samples> print weighted summary of a samples file

Exit codes: 0 success, 2 configuration error, 3 degenerate population,
4 budget exhausted, 5 internal error.  ``--workers`` never changes
results, only how many threads evaluate attempt chunks.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .diagnostics import weighted_moments, weighted_quantile
from .errors import (
    AbcError,
    BudgetExhaustedError,
    ConfigurationError,
    DegeneratePopulationError,
)
from .resultsio import read_samples, write_diagnostics
from .runconfig import parse_config, render_config
from .runner import execute, write_artifacts
from .weights import effective_sample_size, normalise_weights

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_BUDGET = 4
EXIT_INTERNAL = 5


def _exit_code(exc):
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, DegeneratePopulationError):
        return EXIT_DEGENERATE
    if isinstance(exc, BudgetExhaustedError):
        return EXIT_BUDGET
    return EXIT_INTERNAL


def _load_config(path, seed=None, output_dir=None):
    with open(path) as fh:
        text = fh.read()
    cfg = parse_config(text)
    if seed is not None:
        cfg.sections["run"]["seed"] = seed
    if output_dir is not None:
        cfg.sections["run"]["output_dir"] = output_dir
    return cfg


def _report_config_error(exc, quiet):
    if quiet:
        return
    print("configuration errors:", file=sys.stderr)
    errors = exc.errors or [(None, str(exc))]
    for line, message in errors:
        where = f"line {line}" if line else "-"
        print(f"  {where}: {message}", file=sys.stderr)


def cmd_run(args):
    try:
        cfg = _load_config(args.config, args.seed, args.output_dir)
    except ConfigurationError as exc:
        _report_config_error(exc, args.quiet)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = cfg.get("run", "output_dir")
    try:
        output = execute(cfg, workers=args.workers)
    except AbcError as exc:
        code = _exit_code(exc)
        # degenerate runs still leave a diagnostics record behind
        import os

        os.makedirs(out_dir, exist_ok=True)
        write_diagnostics(
            os.path.join(out_dir, "diagnostics.txt"),
            {
                "error_class": type(exc).__name__,
                "error_message": str(exc),
                "exit_code": code,
            },
        )
        if not args.quiet:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    write_artifacts(cfg, output, out_dir, quiet=args.quiet)
    return EXIT_OK


def cmd_validate(args):
    try:
        cfg = _load_config(args.config)
    except ConfigurationError as exc:
        _report_config_error(exc, args.quiet)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(render_config(cfg), end="")
    return EXIT_OK


def cmd_summarise(args):
    try:
        thetas, raw, norm = read_samples(args.samples)
    except (AbcError, OSError) as exc:
        print(f"{exc}", file=sys.stderr)
        return _exit_code(exc) if isinstance(exc, AbcError) else EXIT_INTERNAL
    try:
        weights = normalise_weights(raw)
        ess = effective_sample_size(weights)
        mean, cov = weighted_moments(thetas, raw)
    except DegeneratePopulationError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    sds = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
    header = f"{'coord':>8} {'mean':>14} {'sd':>14} {'q05':>14} {'q50':>14} {'q95':>14}"
    print(header)
    for j in range(thetas.shape[1]):
        qs = [weighted_quantile(thetas, j, p, weights=raw)
              for p in (0.05, 0.5, 0.95)]
        print(f"theta_{j:>2} {mean[j]:>14.6g} {sds[j]:>14.6g} "
              f"{qs[0]:>14.6g} {qs[1]:>14.6g} {qs[2]:>14.6g}")
    print(f"ESS = {ess:.6g}  (n = {thetas.shape[0]})")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="abcmc",
        description="Likelihood-free posterior sampling by simulation",
    )
    parser.add_argument("--quiet", action="store_true",
                        help="suppress informational output")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run configuration")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the configuration seed")
    p_run.add_argument("--workers", type=int, default=1,
                       help="worker threads (never affects results)")
    p_run.add_argument("--output-dir", default=None,
                       help="override the configuration output directory")
    p_run.set_defaults(fn=cmd_run)

    p_val = sub.add_parser("validate", help="validate a configuration")
    p_val.add_argument("config")
    p_val.set_defaults(fn=cmd_validate)

    p_sum = sub.add_parser("summarise", help="summarise a samples file")
    p_sum.add_argument("samples")
    p_sum.set_defaults(fn=cmd_summarise)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except AbcError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
