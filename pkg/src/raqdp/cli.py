"""Command-line front end.

Four commands share a pair of positional file arguments (schema file, query
file):

  analyze   static sensitivity report; never reads data files
  run       exact evaluation over CSV data
  dp-run    noisy release calibrated to the sensitivity bound
  validate  compare the static bound against the brute-force oracle

Exit codes: 0 success, 2 input error, 3 unbounded sensitivity,
4 oracle infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .analyzer import AnalysisOptions, SensitivityReport, global_sensitivity
from .constraints import DEFAULT_DNF_CAP, DEFAULT_ENUM_CAP
from .dp import DpParams, dp_answer, sample_answers
from .engine import Relation, answer, load_csv
from .errors import (
    DataError,
    EvalError,
    OracleError,
    ParseError,
    SchemaError,
    UnboundedSensitivityError,
    ValidationError,
)
from .extmath import INF, Ext, format_ext, is_infinite, parse_rational
from .oracle import DEFAULT_UNIVERSE_CAP, brute_sensitivity, build_universe
from .parsing import parse_query, parse_schemas
from .query import base_relations, validate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNBOUNDED = 3
EXIT_ORACLE = 4

_OVERRIDABLE = frozenset(
    {
        "id",
        "union",
        "intersection",
        "difference",
        "restriction",
        "projection",
        "product",
        "product-one",
        "product-n",
        "product-agg",
        "group-aggregate",
    }
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raqdp",
        description="Sensitivity analysis and differentially private execution "
        "of relational algebra queries over constrained schemas.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, *, data: bool, fmt_default: str):
        sp.add_argument("schema", help="schema file with relation declarations")
        sp.add_argument("query", help="query file")
        sp.add_argument("--enum-cap", type=int, default=DEFAULT_ENUM_CAP,
                        help="solution-count cap for constraint enumeration")
        sp.add_argument("--dnf-cap", type=int, default=DEFAULT_DNF_CAP,
                        help="branch cap for disjunctive constraint splitting")
        sp.add_argument("--format", choices=("json", "table"), default=fmt_default)
        if data:
            sp.add_argument("--data", action="append", default=[], metavar="NAME=PATH",
                            help="CSV data file for a relation (repeatable)")

    sp = sub.add_parser("analyze", help="static sensitivity report (no data needed)")
    common(sp, data=False, fmt_default="table")
    sp.add_argument("--delta-override", action="append", default=[], metavar="OP=VALUE",
                    help="test hook: override an operator's sensitivity constant")

    sp = sub.add_parser("run", help="evaluate the query exactly over CSV data")
    common(sp, data=True, fmt_default="table")
    sp.add_argument("--trace", action="store_true",
                    help="print intermediate relation row counts")

    sp = sub.add_parser("dp-run", help="release a noisy answer")
    common(sp, data=True, fmt_default="json")
    sp.add_argument("--epsilon", required=True,
                    help="privacy parameter (rational, e.g. 1, 1/2, 0.25)")
    sp.add_argument("--seed", type=int, default=0, help="RNG seed (64-bit unsigned)")
    sp.add_argument("--samples", type=int, default=None, metavar="N",
                    help="emit N noisy draws instead of one answer")

    sp = sub.add_parser("validate", help="check the bound against the brute-force oracle")
    common(sp, data=True, fmt_default="json")
    sp.add_argument("--universe-cap", type=int, default=DEFAULT_UNIVERSE_CAP,
                    help="largest combined tuple universe the oracle will enumerate")
    sp.add_argument("--delta-override", action="append", default=[], metavar="OP=VALUE",
                    help="test hook: override an operator's sensitivity constant")
    return parser


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _parse_overrides(items: list[str]) -> tuple:
    out = []
    for item in items:
        op, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--delta-override expects OP=VALUE, got {item!r}")
        op = op.strip()
        if op not in _OVERRIDABLE:
            raise ValueError(f"unknown operator {op!r} in --delta-override")
        text = value.strip()
        delta: Ext = INF if text == "inf" else parse_rational(text)
        out.append((op, delta))
    return tuple(out)


def _parse_data(items: list[str], schemas: dict) -> dict[str, Relation]:
    db: dict[str, Relation] = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            raise ValueError(f"--data expects NAME=PATH, got {item!r}")
        name = name.strip()
        if name not in schemas:
            raise ValueError(f"--data names unknown relation {name!r}")
        if name in db:
            raise ValueError(f"--data given twice for relation {name!r}")
        db[name] = load_csv(schemas[name], path.strip())
    return db


def _json_value(v):
    if isinstance(v, str):
        return v
    return format_ext(Fraction(v))


def _print_report(report: SensitivityReport, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report.to_json_dict(), indent=2))
        return
    print(f"global sensitivity: {format_ext(report.gs)}")
    top = report.top
    line = f"aggregation: {top.fn.kind}"
    if top.fn.attr is not None:
        line += f"({top.fn.attr})"
    line += f"   delta_f: {format_ext(top.delta_f)}"
    b = top.bounds
    if b is not None and not b.empty:
        line += f"   value range: [{format_ext(b.lower)}, {format_ext(b.upper)}]"
    print(line)
    print("nodes (bottom-up):")
    for rec in report.nodes:
        print(
            f"  {rec.op:<16} delta={format_ext(rec.delta_op):<6} "
            f"diam={format_ext(rec.diam):<10} S={format_ext(rec.s)}"
        )
        print(f"    constraint: {rec.constraint_text}")
    for w in report.warnings:
        print(f"warning: {w}")


def cmd_analyze(args) -> int:
    schemas = parse_schemas(_read(args.schema))
    tq = parse_query(_read(args.query))
    options = AnalysisOptions(
        enum_cap=args.enum_cap,
        dnf_cap=args.dnf_cap,
        delta_overrides=_parse_overrides(args.delta_override),
    )
    report = global_sensitivity(tq, schemas, options)
    _print_report(report, args.format)
    return EXIT_UNBOUNDED if is_infinite(report.gs) else EXIT_OK


def cmd_run(args) -> int:
    schemas = parse_schemas(_read(args.schema))
    tq = parse_query(_read(args.query))
    db = _parse_data(args.data, schemas)
    missing = sorted(base_relations(tq.body) - set(db))
    if missing:
        raise ValueError(f"no --data for relation(s): {', '.join(missing)}")
    node_schemas = validate(tq, schemas, enum_cap=args.enum_cap, dnf_cap=args.dnf_cap)
    trace: list | None = [] if args.trace else None
    value = answer(
        tq, db, node_schemas, enum_cap=args.enum_cap, dnf_cap=args.dnf_cap, trace=trace
    )
    if args.format == "json":
        out = {"answer": format_ext(value), "answer_float": float(value)}
        if trace is not None:
            out["trace"] = [{"op": op, "rows": n} for op, n in trace]
        print(json.dumps(out, indent=2))
    else:
        if trace is not None:
            print("trace (bottom-up):")
            for op, n in trace:
                print(f"  {op:<16} {n} row{'s' if n != 1 else ''}")
        print(format_ext(value))
    return EXIT_OK


def cmd_dp_run(args) -> int:
    schemas = parse_schemas(_read(args.schema))
    tq = parse_query(_read(args.query))
    db = _parse_data(args.data, schemas)
    missing = sorted(base_relations(tq.body) - set(db))
    if missing:
        raise ValueError(f"no --data for relation(s): {', '.join(missing)}")
    params = DpParams(parse_rational(args.epsilon), args.seed)
    options = AnalysisOptions(enum_cap=args.enum_cap, dnf_cap=args.dnf_cap)
    if args.samples is not None:
        draws = sample_answers(tq, schemas, db, params, args.samples, options=options)
        if args.format == "json":
            print(json.dumps({"samples": [float(x) for x in draws]}))
        else:
            for x in draws:
                print(float(x))
        return EXIT_OK
    result = dp_answer(tq, schemas, db, params, options=options)
    if args.format == "json":
        print(json.dumps(result.to_json_dict(), indent=2))
    else:
        print(f"noisy answer: {result.noisy_value}")
        print(f"gs: {format_ext(result.gs_used)}   epsilon: {result.epsilon}   "
              f"seed: {result.seed}   rng: {result.rng_name}")
        print(f"note: {result.note}")
        for w in result.warnings:
            print(f"warning: {w}")
    return EXIT_OK


def cmd_validate(args) -> int:
    schemas = parse_schemas(_read(args.schema))
    tq = parse_query(_read(args.query))
    context = _parse_data(args.data, schemas)
    options = AnalysisOptions(
        enum_cap=args.enum_cap,
        dnf_cap=args.dnf_cap,
        delta_overrides=_parse_overrides(args.delta_override),
    )
    report = global_sensitivity(tq, schemas, options)
    universe = build_universe(tq, schemas, context, cap=args.universe_cap)
    brute = brute_sensitivity(tq, universe)
    if brute.value > report.gs:
        verdict = "VIOLATION"
    elif brute.value == report.gs:
        verdict = "STRICT"
    else:
        verdict = "SOUND"
    witness = None
    if brute.witness is not None:
        before, after = brute.witness
        witness = {
            "R": {k: [[_json_value(v) for v in t] for t in rows] for k, rows in before.items()},
            "R_plus": {k: [[_json_value(v) for v in t] for t in rows] for k, rows in after.items()},
        }
    out = {
        "gs": format_ext(report.gs),
        "oracle": format_ext(brute.value),
        "witness": witness,
        "verdict": verdict,
    }
    if args.format == "json":
        print(json.dumps(out, indent=2))
    else:
        print(f"static bound: {out['gs']}   oracle: {out['oracle']}   verdict: {verdict}")
        if witness is not None:
            print(f"witness pair: {json.dumps(witness)}")
    return EXIT_OK


_COMMANDS = {
    "analyze": cmd_analyze,
    "run": cmd_run,
    "dp-run": cmd_dp_run,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (SchemaError, ValidationError, EvalError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        for line in e.violations:
            print(f"  {line}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, ZeroDivisionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except UnboundedSensitivityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNBOUNDED
    except OracleError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
