"""Command-line entry point.

Exit codes:
  0  success
  1  unreadable file, parse error or malformed input
  2  analysis error (sensitive guard, sensitive scalar, ...)
  3  metric-preservation violation
  4  privacy filter halted the computation
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .errors import AnalysisError, FilterHalt, SensTraceError
from .evaluator import REFERENCE, eval_entry
from .frontend import parse_inputs, parse_program, render_result, result_to_json

EXIT_OK, EXIT_INPUT, EXIT_ANALYSIS, EXIT_VIOLATION, EXIT_HALT = range(5)


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _positive_float(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def _alpha(text):
    x = float(text)
    if not x > 1:
        raise argparse.ArgumentTypeError("Renyi order must be greater than 1")
    return x


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SENSTRACE_SEED")
    return int(env) if env else 0


def _evaluator(name):
    return REFERENCE if name is None else harness.MUTATIONS[name]()


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _fail(kind: str, exc: Exception, code: int, as_json: bool) -> int:
    print(f"{kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
    if as_json:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
    return code


def cmd_run(args) -> int:
    try:
        program = parse_program(_read(args.program))
        inputs = parse_inputs(_read(args.inputs))
    except (OSError, SensTraceError) as exc:
        return _fail("input error", exc, EXIT_INPUT, args.json)
    try:
        result = eval_entry(inputs, program)
    except AnalysisError as exc:
        return _fail("analysis error", exc, EXIT_ANALYSIS, args.json)
    print(json.dumps(result_to_json(result)) if args.json else render_result(result))
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        program = parse_program(_read(args.program))
        spec = harness.NeighborSpec.from_json(json.loads(_read(args.spec)))
    except (OSError, ValueError, SensTraceError) as exc:
        return _fail("input error", exc, EXIT_INPUT, args.json)
    trials = args.trials or spec.trials or 1000
    try:
        report = harness.check_preservation(program, spec, trials, _seed(args), _evaluator(args.mutation))
    except harness.BaseEvaluationFailed as exc:
        return _fail("analysis error", exc.cause, EXIT_ANALYSIS, args.json)
    if args.json or not report.passed:
        print(json.dumps(report.to_json()))
    else:
        print(f"ok: {report.trials} trials, max |r1-r2| = {report.max_distance:.6g}")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_corpus(args) -> int:
    try:
        summary = harness.run_corpus(args.dir, args.trials, _seed(args), _evaluator(args.mutation))
    except (OSError, ValueError, SensTraceError) as exc:
        return _fail("input error", exc, EXIT_INPUT, args.json)
    print(json.dumps(summary) if args.json else harness.describe(summary))
    return EXIT_OK if summary["passed"] else EXIT_VIOLATION


def cmd_demo_gd(args) -> int:
    try:
        result = harness.dp_gradient_descent_demo(alpha=args.alpha, eps_per_iter=args.eps,
                                                  eps_budget=args.budget, seed=_seed(args))
    except FilterHalt as exc:
        return _fail("privacy filter", exc, EXIT_HALT, args.json)
    if args.json:
        print(json.dumps(result.to_json()))
    else:
        print(f"noisy accuracy: {result.accuracy:.4f} after {result.iterations} iterations")
        print(result.display)
        print(json.dumps(result.odometer))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="senstrace", description="Dynamic sensitivity analysis and DP tooling.",
        epilog=__doc__.split("\n\n", 1)[1], formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="RNG seed (default: $SENSTRACE_SEED or 0)")
        p.add_argument("--json", action="store_true", help="print a single JSON document")

    p = sub.add_parser("run", help="evaluate a program on tagged inputs")
    p.add_argument("program")
    p.add_argument("inputs")
    common(p)
    p.set_defaults(func=cmd_run)

    mutations = sorted(harness.MUTATIONS)
    p = sub.add_parser("check", help="test metric preservation of one program")
    p.add_argument("program")
    p.add_argument("spec")
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--mutation", choices=mutations, help="use a deliberately broken evaluator")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("corpus", help="check every fixture in a corpus directory")
    p.add_argument("dir", nargs="?", default=str(harness.CORPUS_DIR))
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--mutation", choices=mutations)
    common(p)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("demo-gd", help="differentially private gradient descent demo")
    p.add_argument("--alpha", type=_alpha, default=10.0)
    p.add_argument("--eps", type=_positive_float, default=0.1, help="Renyi epsilon per query")
    p.add_argument("--budget", type=_positive_float, default=2.0, help="Renyi filter budget")
    common(p)
    p.set_defaults(func=cmd_demo_gd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
