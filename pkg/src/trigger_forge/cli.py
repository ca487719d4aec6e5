"""Command-line entry point.

Exit codes: 0 a triggering term was found, 1 none found within the budgets,
2 the search was inconclusive (global timeout), 3 input or environment error.
"""

from __future__ import annotations

import argparse
import sys

from .config import Config, PRESETS, preset
from .pipeline import Report, run
from .preprocess import dump_normalized, ensure_patterns, normalize
from .errors import TriggerForgeError
from .smtlib import parse_problem


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="trigger-forge",
        description="Synthesize missing E-matching triggering terms that let "
                    "an SMT solver finish an unsatisfiability proof.")
    p.add_argument("input", nargs="?", default="-",
                   help="SMT-LIB file, or - for stdin (default)")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="configuration preset (C0 default, C1 sigma=0.1, "
                        "C2 beta=1, C3 type-based, C4 sigma=0.1 + subterm)")
    p.add_argument("--sigma", type=float, help="similarity threshold in [0,1]")
    p.add_argument("--depth", type=int, help="max transitive clustering depth")
    p.add_argument("--mu", type=int, help="max models per G formula")
    p.add_argument("--beta", type=int, help="validation batch size")
    p.add_argument("--phi", type=int, help="max occurrences of a conjunct per cluster")
    p.add_argument("--g-budget", type=int, dest="g_budget",
                   help="max G formulas per pivot conjunct")
    p.add_argument("--type-based", action="store_true", dest="type_based",
                   help="enable type-based rewriting candidates")
    p.add_argument("--subterm", action="store_true",
                   help="enable unification of sub-terms")
    p.add_argument("--timeout", type=float, help="global timeout in seconds")
    p.add_argument("--model-timeout", type=float, dest="model_timeout",
                   help="per-model solver timeout in seconds")
    p.add_argument("--validate-timeout", type=float, dest="validate_timeout",
                   help="per-validation solver timeout in seconds")
    p.add_argument("--solver-cmd", dest="solver_cmd",
                   help="solver command line (default: z3 -in -smt2, or the "
                        "bundled z3 WASM build; TRIGGER_FORGE_SOLVER overrides)")
    p.add_argument("--solver-log", dest="solver_log", default="",
                   help="append all solver traffic to this file")
    p.add_argument("--dump-normalized", dest="dump_normalized", metavar="FILE",
                   help="write the normalized problem as SMT-LIB and continue")
    p.add_argument("--json", metavar="FILE",
                   help="write the full JSON report to FILE (- for stdout)")
    p.add_argument("--all-terms", action="store_true", dest="all_terms",
                   help="keep searching after the first proven term")
    p.add_argument("--lsh", action="store_true",
                   help="use a MinHash prefilter before exact Jaccard checks")
    p.add_argument("--jobs", type=int, help="process pivots with N worker threads")
    p.add_argument("--seed", action="append", default=[], metavar="KEY=VALUE",
                   help="override a solver seed option, e.g. smt.random_seed=0")
    return p


def config_from_args(args: argparse.Namespace) -> Config:
    overrides = {}
    mapping = {
        "sigma": "sigma", "depth": "delta", "mu": "mu", "beta": "beta",
        "phi": "phi", "g_budget": "g_budget", "timeout": "global_timeout_s",
        "model_timeout": "model_timeout_s",
        "validate_timeout": "validate_timeout_s", "jobs": "jobs",
    }
    for arg_name, cfg_name in mapping.items():
        value = getattr(args, arg_name)
        if value is not None:
            overrides[cfg_name] = value
    if args.type_based:
        overrides["enable_type_based"] = True
    if args.subterm:
        overrides["enable_subterm"] = True
    if args.all_terms:
        overrides["all_terms"] = True
    if args.lsh:
        overrides["use_lsh"] = True
    if args.solver_cmd:
        import shlex
        overrides["solver_cmd"] = tuple(shlex.split(args.solver_cmd))
    if args.solver_log:
        overrides["solver_log"] = args.solver_log
    seeds = {}
    for item in args.seed:
        key, _, value = item.partition("=")
        seeds[key] = int(value)
    if seeds:
        overrides["seed_overrides"] = seeds
    if args.preset:
        return preset(args.preset, **overrides)
    return Config(**overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    if args.input == "-":
        text = sys.stdin.read()
        source = "<stdin>"
    else:
        try:
            with open(args.input, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        source = args.input

    if args.dump_normalized:
        try:
            problem, _ = normalize(parse_problem(text, source))
            problem = ensure_patterns(problem)
            with open(args.dump_normalized, "w", encoding="utf-8") as f:
                f.write(dump_normalized(problem))
        except TriggerForgeError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 3

    report: Report = run(config, text, source)
    print(report.human_text())
    if args.json:
        payload = report.to_json()
        if args.json == "-":
            print(payload)
        else:
            with open(args.json, "w", encoding="utf-8") as f:
                f.write(payload + "\n")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
