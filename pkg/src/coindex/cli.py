"""Command-line front end.

Every command writes one JSON report to standard output.  Exit codes:
0 success, 1 usage or input error, 2 inadmissible triple, 3 degenerate
triple left unresolved (index without --auto-perturb, or a failed
perturbation).  Verification commands exit 1 on any failed property.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import report
from .engine import SolverConfig, index_with_auto_perturb, total_index
from .errors import CoindexError
from .harness import SuiteConfig, counterexample_demo, probe_conjecture, run_axiom_suite
from .lefschetz import lefschetz_det_oracle, lefschetz_terms, lefschetz_trace
from .maps import MapPair, parse_region
from .numcore import IntMatrix

DEFAULT_SEED = 42
SEED_ENV = "COINDEX_SEED"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_DEGENERATE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve_seed(flag):
    if flag is not None:
        return flag, "flag"
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env), "env"
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")
    return DEFAULT_SEED, "default"


def _summary(args, text: str) -> None:
    if not args.quiet:
        print(text, file=sys.stderr)


def cmd_index(args) -> tuple[int, dict]:
    seed, seed_source = _resolve_seed(args.seed)
    cfg = SolverConfig.from_text(args.config) if args.config else SolverConfig()
    torus = args.space == "torus"
    if not torus and (args.linear_f or args.linear_g):
        raise UsageError("--linear-f/--linear-g only apply to --space torus")
    if torus:
        F = IntMatrix.from_text(args.linear_f) if args.linear_f else None
        G = IntMatrix.from_text(args.linear_g) if args.linear_g else None
        pair = MapPair.torus(args.f, args.g, args.n, F, G)
    else:
        pair = MapPair.euclidean(args.f, args.g, args.n)
    region = parse_region(args.region, args.n, periodic=torus)

    if args.auto_perturb:
        rep = index_with_auto_perturb(pair, region, cfg, seed)
    else:
        rep = total_index(pair, region, cfg)

    diagnostics = []
    if not rep.certificate.admissible:
        diagnostics.append(
            f"triple is not admissible: sampled boundary gap {rep.certificate.boundary_gap:.3g} "
            f"<= threshold {rep.certificate.gap_threshold:.3g}"
        )
        code = EXIT_INADMISSIBLE
    elif rep.total_index is None:
        if rep.perturbation_failed:
            diagnostics.append("perturbation to a nondegenerate triple failed")
        else:
            diagnostics.append(f"{rep.degenerate_count} degenerate coincidence(s); rerun with --auto-perturb")
        code = EXIT_DEGENERATE
    else:
        code = EXIT_OK
        if rep.lefschetz is not None and rep.lefschetz != rep.total_index:
            diagnostics.append(
                f"Lefschetz cross-check mismatch: index {rep.total_index} != L {rep.lefschetz}; "
                "coincidences may have been missed (raise grid_per_axis)"
            )
    if rep.shift is not None:
        diagnostics.append(f"index computed after constant shift {list(rep.shift)}")

    inputs = {
        "f": args.f,
        "g": args.g,
        "n": args.n,
        "space": args.space,
        "linear_f": pair.linear_f.to_text() if torus else None,
        "linear_g": pair.linear_g.to_text() if torus else None,
        "region": region.to_text(),
        "auto_perturb": bool(args.auto_perturb),
        "seed": seed,
        "seed_source": seed_source,
        "config": cfg.to_dict(),
    }
    _summary(args, f"index = {rep.total_index} ({len(rep.points)} coincidence point(s))"
             + (f", L = {rep.lefschetz}" if rep.lefschetz is not None else ""))
    return code, report.make_report("index", inputs, rep.to_dict(), diagnostics)


def cmd_lefschetz(args) -> tuple[int, dict]:
    try:
        F = IntMatrix.from_text(args.F)
        G = IntMatrix.from_text(args.G)
    except (ValueError, CoindexError) as exc:
        raise UsageError(str(exc))
    if F.n != G.n:
        raise UsageError(f"--F is {F.n}x{F.n} but --G is {G.n}x{G.n}")
    trace = lefschetz_trace(F, G)
    oracle = lefschetz_det_oracle(F, G)
    diagnostics = []
    if oracle == 0:
        diagnostics.append("det(G - F) = 0: the linear torus pair is degenerate and its index is undefined "
                           "without perturbation")
    result = {
        "trace": trace,
        "oracle": oracle,
        "agree": trace == oracle,
        "terms": lefschetz_terms(F, G),
    }
    _summary(args, f"L = {trace} (trace formula), det(G - F) = {oracle}")
    inputs = {"F": F.to_text(), "G": G.to_text()}
    return (EXIT_OK if trace == oracle else EXIT_USAGE), report.make_report("lefschetz", inputs, result, diagnostics)


def _dims(text: str) -> tuple:
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--dims must be a comma-separated list of integers, got {text!r}")
    if not dims or any(d < 1 for d in dims):
        raise UsageError("--dims needs positive dimensions")
    return dims


def cmd_verify(args) -> tuple[int, dict]:
    seed, seed_source = _resolve_seed(args.seed)
    cases = args.cases if args.cases is not None else (100 if args.suite == "axioms" else 50)
    if cases < 1:
        raise UsageError("--cases must be at least 1")
    cfg = SuiteConfig(rng_seed=seed, cases_per_property=cases, dimension_range=_dims(args.dims))
    suite = run_axiom_suite(cfg) if args.suite == "axioms" else probe_conjecture(cfg)
    diagnostics = [
        f"{p.name}: {len(p.failures)} failure(s)" for p in suite.properties if p.failures
    ]
    _summary(args, f"{args.suite}: {suite.total_failures} failure(s)")
    inputs = {"suite": args.suite, "seed": seed, "seed_source": seed_source, "cases": cases,
              "dims": list(cfg.dimension_range), "suite_config": cfg.to_dict()}
    code = EXIT_OK if suite.passed else EXIT_USAGE
    return code, report.make_report("verify", inputs, suite.to_dict(), diagnostics)


def cmd_demo(args) -> tuple[int, dict]:
    if args.c == 1:
        raise UsageError("--c 1 leaves the index unchanged; choose c != 1")
    seed, seed_source = _resolve_seed(args.seed)
    demo = counterexample_demo(args.c, cases=args.cases, rng_seed=seed)
    nsm = demo["non_selfmap_triple"]
    _summary(args, f"non-selfmap triple: engine {nsm['engine']}, scaled {nsm['scaled']}; "
             f"selfmap suite passed: {demo['selfmap_suite_passed']}")
    inputs = {"c": args.c, "cases": args.cases, "seed": seed, "seed_source": seed_source}
    ok = demo["selfmap_suite_passed"] and demo["diverges"]
    return (EXIT_OK if ok else EXIT_USAGE), report.make_report("demo", inputs, demo, [])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coindex", description="Coincidence index computations on R^n and tori.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--quiet", action="store_true", help="no summary on standard error")

    p = sub.add_parser("index", help="coincidence index of (f, g, U)")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--space", required=True, choices=("rn", "torus"))
    p.add_argument("--linear-f", dest="linear_f")
    p.add_argument("--linear-g", dest="linear_g")
    p.add_argument("--region", required=True)
    p.add_argument("--auto-perturb", dest="auto_perturb", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="key=value,key=value solver overrides")
    common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("lefschetz", help="Lefschetz number of torus linear parts")
    p.add_argument("--F", required=True)
    p.add_argument("--G", required=True)
    common(p)
    p.set_defaults(func=cmd_lefschetz)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("--suite", required=True, choices=("axioms", "conjecture"))
    p.add_argument("--seed", type=int)
    p.add_argument("--cases", type=int)
    p.add_argument("--dims", default="1,2")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("demo", help="non-uniqueness under weak normalization")
    p.add_argument("--c", required=True, type=float)
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "index" and args.n < 1:
            raise UsageError("--n must be at least 1")
        code, doc = args.func(args)
    except UsageError as exc:
        print(f"coindex: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CoindexError, ValueError) as exc:
        print(f"coindex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(report.dumps(doc) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
