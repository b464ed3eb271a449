"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 bad input, 3 resource limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .costmodel import DEFAULT_POINTS, CostModel, GridError, load_timing_grids, synthetic_table
from .emit import PlanError, ProfileError, build_plan, emit_plan, read_plan, render
from .frontend import ShapeError, normalize, parse, sample_instances
from .selection import (
    base_set,
    candidate_pool,
    expand_set,
    penalty_bound,
    reference_optimum,
)
from .variants import EnumerationLimitError, enum_limit, format_tree

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3

DEFAULTS = {
    "expand": 0,
    "objective": "avg",
    "train": 1000,
    "validate": 100,
    "lo": 2,
    "hi": 1000,
    "seed": 42,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _sizes(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lo", type=int, default=DEFAULTS["lo"], help="smallest size (default 2)")
    p.add_argument("--hi", type=int, default=DEFAULTS["hi"], help="largest size (default 1000)")
    p.add_argument("--seed", type=int, default=DEFAULTS["seed"], help="random seed (default 42)")


def _selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--objective", choices=("max", "avg"), default=DEFAULTS["objective"])
    p.add_argument("--train", type=int, default=DEFAULTS["train"],
                   help="training instances (default 1000)")
    p.add_argument("--cost-model", default="flops",
                   help="'flops' or a timing table CSV (default flops)")
    p.add_argument("--enum-limit", type=int, default=None,
                   help="longest chain enumerated exhaustively (env GMC_ENUM_LIMIT)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gmc", description="Matrix chain compiler with run-time dispatch.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="shape file -> plan")
    p.add_argument("input", help=".gmc shape file")
    p.add_argument("-o", "--output", help="plan file (default: <input>.gmcplan)")
    p.add_argument("--expand", type=int, default=DEFAULTS["expand"], metavar="K",
                   help="extra variants added greedily to the base set (default 0)")
    p.add_argument("--render", metavar="PROFILE", help="also write source text with this profile")
    p.add_argument("--render-output", help="rendered file (default: <output>.txt)")
    _selection(p)
    _sizes(p)

    p = sub.add_parser("report", help="validate a plan against the exhaustive optimum")
    p.add_argument("plan")
    p.add_argument("-o", "--output", help="per-instance CSV (default stdout summary only)")
    p.add_argument("--validate", type=int, default=DEFAULTS["validate"])
    p.add_argument("--enum-limit", type=int, default=None)
    _sizes(p)

    p = sub.add_parser("expand", help="grow the variant set of an existing plan")
    p.add_argument("plan")
    p.add_argument("-k", "--expand", type=int, required=True, metavar="K",
                   help="number of variants to add")
    p.add_argument("-o", "--output", help="output plan (default: overwrite input)")
    _selection(p)
    _sizes(p)

    p = sub.add_parser("bench", help="FLOP study over random shapes")
    p.add_argument("--n", type=int, default=5, help="chain length (default 5)")
    p.add_argument("--shapes", type=int, default=200)
    p.add_argument("--train", type=int, default=DEFAULTS["train"])
    p.add_argument("--validate", type=int, default=DEFAULTS["validate"])
    p.add_argument("--expand", type=int, default=2, metavar="K")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--enum-limit", type=int, default=None)
    p.add_argument("-o", "--output", help="per-instance CSV")
    _sizes(p)

    p = sub.add_parser("dump-catalog", help="print the kernel catalog")
    p.add_argument("--format", choices=("json", "text"), default="text")

    p = sub.add_parser("gen-synthetic-grid", help="write a plausible timing table")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.add_argument("--points", type=int, nargs="+", default=list(DEFAULT_POINTS))
    p.add_argument("--seed", type=int, default=0)
    return ap


# --- helpers --------------------------------------------------------------


def _load_model(spec: str) -> CostModel:
    if spec == "flops":
        return CostModel.flops()
    return CostModel.from_grids(load_timing_grids(spec))


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _check_sizes(args) -> None:
    if args.lo < 1 or args.hi < args.lo:
        raise UsageError(f"need 1 <= --lo <= --hi, got {args.lo}, {args.hi}")


def _plan_info(args, bound) -> dict:
    return {
        "objective": args.objective,
        "train": args.train,
        "lo": args.lo,
        "hi": args.hi,
        "seed": args.seed,
        "penalty_bound": str(bound),
    }


def _select(shape, args, model, extra: int, start=None):
    rng = np.random.default_rng(args.seed)
    Q = sample_instances(shape.classes, args.train, args.lo, args.hi, rng)
    optimum = reference_optimum(shape, Q, model)
    Z0 = start if start is not None else base_set(shape, Q, model, optimum=optimum)
    if extra > 0:
        pool = candidate_pool(shape, rng=args.seed)
        Z0 = expand_set(pool, Q, args.objective, len(Z0) + extra, Z0, model, optimum)
    return Z0


# --- commands -------------------------------------------------------------


def cmd_compile(args) -> int:
    _check_sizes(args)
    if args.expand < 0:
        raise UsageError("--expand must be >= 0")
    shape = normalize(parse(Path(args.input).read_text()))
    model = _load_model(args.cost_model)
    variants = _select(shape, args, model, args.expand)
    bound = penalty_bound(shape)
    plan = build_plan(shape, variants, model, _plan_info(args, bound))
    out = args.output or str(Path(args.input).with_suffix(".gmcplan"))
    _write(out, emit_plan(plan))
    print(f"{len(variants)} variant(s), {len(shape.classes)} size class(es), "
          f"penalty bound {bound} -> {out}")
    for i, v in enumerate(variants):
        print(f"  [{i}] {format_tree(v.tree)}")
    if args.render:
        text = render(plan, args.render)
        rout = args.render_output or out + ".txt"
        _write(rout, text)
        print(f"rendered with profile {args.render} -> {rout}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .experiments import validation_sweep

    _check_sizes(args)
    plan = read_plan(args.plan)
    shape = plan.shape
    if shape.n > enum_limit():
        raise EnumerationLimitError(
            f"chain of {shape.n} exceeds the enumeration limit {enum_limit()}")
    Q = sample_instances(shape.classes, args.validate, args.lo, args.hi, args.seed)
    sweep = validation_sweep(shape, plan.variants, Q, plan.model)
    if args.output:
        with open(args.output, "w", newline="") as f:
            sweep.write_csv(f)
    for label, rep in sweep.reports().items():
        print(f"{label:>5} ratio-1: {rep.summary()}")
    return EXIT_OK


def cmd_expand(args) -> int:
    _check_sizes(args)
    plan = read_plan(args.plan)
    model = _load_model(args.cost_model) if args.cost_model != "flops" else plan.model
    variants = _select(plan.shape, args, model, args.expand, start=list(plan.variants))
    info = dict(plan.info, expanded_by=args.expand)
    new = build_plan(plan.shape, variants, model, info)
    out = args.output or args.plan
    _write(out, emit_plan(new))
    print(f"{len(plan.variants)} -> {len(variants)} variant(s) -> {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .experiments import bench, bench_summary, write_bench_csv

    _check_sizes(args)
    if args.n > enum_limit():
        raise EnumerationLimitError(f"--n {args.n} exceeds the enumeration limit {enum_limit()}")
    results = bench(args.n, args.shapes, args.train, args.validate, args.expand,
                    args.lo, args.hi, args.seed, args.jobs)
    if args.output:
        with open(args.output, "w", newline="") as f:
            write_bench_csv(results, f)
    print(json.dumps(bench_summary(results), indent=1, sort_keys=True))
    return EXIT_OK


def cmd_dump_catalog(args) -> int:
    records = catalog.dump_catalog()
    if args.format == "json":
        print(json.dumps(records, indent=1))
        return EXIT_OK
    for r in records:
        cost = "; ".join(f"{b}: {c}" for b, c in r["cost"].items())
        kinds = ",".join(sorted(set(r["type"].values()))) or "-"
        print(f"{r['id']:<9} {kinds:<8} {cost}")
    print(f"max alpha (full catalog): {catalog.max_alpha()}")
    return EXIT_OK


def cmd_gen_grid(args) -> int:
    _write(args.output, synthetic_table(tuple(args.points), args.seed))
    return EXIT_OK


COMMANDS = {
    "compile": cmd_compile,
    "report": cmd_report,
    "expand": cmd_expand,
    "bench": cmd_bench,
    "dump-catalog": cmd_dump_catalog,
    "gen-synthetic-grid": cmd_gen_grid,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    saved = os.environ.get("GMC_ENUM_LIMIT")
    if getattr(args, "enum_limit", None) is not None:
        os.environ["GMC_ENUM_LIMIT"] = str(args.enum_limit)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"gmc: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EnumerationLimitError as e:
        print(f"gmc: resource limit: {e}", file=sys.stderr)
        return EXIT_LIMIT
    except (ShapeError, PlanError, ProfileError, GridError, OSError) as e:
        print(f"gmc: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (json.JSONDecodeError, ValueError) as e:
        print(f"gmc: invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if saved is None:
            os.environ.pop("GMC_ENUM_LIMIT", None)
        else:
            os.environ["GMC_ENUM_LIMIT"] = saved


if __name__ == "__main__":
    sys.exit(main())
