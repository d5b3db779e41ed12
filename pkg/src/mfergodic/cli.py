"""Command line: ``mfergodic run <scenario> [--out DIR] [--seed U64] [--threads K]``."""

from __future__ import annotations

import argparse
import sys

from .errors import MFErgodicError, ScenarioError
from .runner import OUTPUT_ENV, emit_report, resolve_output_dir, run_experiment
from .scenario import parse_scenario

EXIT_OK, EXIT_SCENARIO, EXIT_SOLVER = 0, 2, 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mfergodic", description="Mean-field ergodic control experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file and write reports")
    run.add_argument("scenario")
    run.add_argument("--out", help=f"output directory (default: scenario setting, then ${OUTPUT_ENV})")
    run.add_argument("--seed", type=_u64, help="override the simulation seed")
    run.add_argument("--threads", type=_positive, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    try:
        report = run_experiment(sc, seed=args.seed, threads=args.threads)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except MFErgodicError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        files = emit_report(report, sc, resolve_output_dir(sc, args.out))
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
