"""Command-line front end.

Exit codes: 0 success, 2 parse/type/input error, 3 evaluation error,
4 undecided threshold cells under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import algebra, inference, parsing
from .errors import (
    EmptyBagUndefined,
    MultiplicityOverflow,
    ParseError,
    PpdbError,
    ZeroProbabilityCondition,
)
from .instances import BagInstance, canonicalize, instance_to_json, read_csv, read_jsonl, union_all
from .pdb import FinitePdb, event_from_json, load_pdb
from .schema import load_schema

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME, EXIT_UNDECIDED = 0, 2, 3, 4
_RUNTIME = (EmptyBagUndefined, MultiplicityOverflow, ZeroProbabilityCondition)


class CliError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False)


def _frac(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def _read_text(arg: str) -> str:
    """A file's contents, or ``arg`` itself when no such file exists."""
    p = Path(arg)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    return arg


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise CliError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from None


def load_query(arg: str | None):
    if arg is None:
        return None
    text = _read_text(arg)
    if arg.endswith(".dl") or parsing.looks_like_datalog(text):
        return parsing.parse_datalog(text)
    return parsing.parse_query(text)


def load_data(schema, items: Sequence[str]) -> BagInstance:
    """Each item is ``R=path.csv``, ``path.csv`` (relation = file stem) or ``path.jsonl``."""
    parts = []
    for item in items:
        rel, _, path = item.rpartition("=")
        if not Path(path).is_file():
            raise CliError(f"cannot read {path}")
        if path.endswith((".jsonl", ".json")) and not rel:
            parts.append(read_jsonl(schema, path))
        else:
            parts.append(read_csv(schema, rel or Path(path).stem, path))
    return union_all(schema, parts)


def _pdb(args):
    schema = load_schema(args.schema) if args.schema else None
    try:
        return load_pdb(args.pdb, schema)
    except OSError as e:
        raise CliError(f"cannot read {args.pdb}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise CliError(f"{args.pdb}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from None


def _event(args):
    return event_from_json(_load_json(args.event))


def _partition(args):
    return inference.partition_from_json(_load_json(args.partition))


def _mc(args) -> dict:
    return {"samples": args.samples, "seed": args.seed, "level": args.level, "threads": args.threads}


def render_instance(inst: BagInstance) -> str:
    lines = []
    rows = canonicalize(inst)
    for rel in sorted(inst.schema.relations):
        typ = inst.schema.type_of(rel)
        lines.append(f"{rel}({', '.join(typ)})")
        for f, m in rows:
            if f.relation == rel:
                vals = "\t".join(_dump(v) for v in f.values)
                lines.append(f"  {vals}\t×{m}")
    return "\n".join(lines)


def _value_json(v):
    if isinstance(v, inference.Estimate):
        return v.to_json()
    return _frac(v)


def _value_text(v) -> str:
    if isinstance(v, inference.Estimate):
        return f"{v.p_hat:.6f} [{v.ci[0]:.6f}, {v.ci[1]:.6f}]"
    return _frac(v)


# -- subcommands ------------------------------------------------------------


def cmd_eval(args, out) -> int:
    schema = load_schema(args.schema)
    query = load_query(args.query)
    algebra.infer_schema(query, schema)
    inst = load_data(schema, args.data or [])
    res = algebra.evaluate(query, inst)
    if args.format == "json":
        print(_dump(instance_to_json(res)), file=out)
    else:
        print(render_instance(res), file=out)
    return EXIT_OK


def cmd_exact(args, out) -> int:
    pdb = _pdb(args)
    if not isinstance(pdb, FinitePdb):
        raise CliError("exact needs a finite PDB")
    p = inference.pushforward_exact(pdb, load_query(args.query), _event(args))
    print(_dump({"p": _frac(p)}) if args.format == "json" else _frac(p), file=out)
    return EXIT_OK


def cmd_estimate(args, out) -> int:
    pdb = _pdb(args)
    est = inference.pushforward_mc(
        pdb, load_query(args.query), _event(args), args.samples, args.seed, args.level, args.threads
    )
    print(_dump(est.to_json()), file=out)
    return EXIT_OK


def cmd_marginals(args, out) -> int:
    pdb = _pdb(args)
    res = inference.marginals(
        pdb, load_query(args.query), _partition(args), include_remainder=args.remainder, **_mc(args)
    )
    if args.format == "json":
        print(_dump([{"label": c.label, "p": _value_json(v)} for c, v in res]), file=out)
    else:
        for c, v in res:
            print(f"{c.label}\t{_value_text(v)}", file=out)
    return EXIT_OK


def cmd_threshold(args, out) -> int:
    pdb = _pdb(args)
    alpha = Fraction(args.alpha)
    res = inference.threshold_query(pdb, load_query(args.query), _partition(args), alpha, **_mc(args))
    groups = (("in", res.included), ("out", res.excluded), ("undecided", res.undecided))
    if args.format == "json":
        print(_dump({k: [{"label": c.label, "p": _value_json(v)} for c, v in g] for k, g in groups}), file=out)
    else:
        for k, g in groups:
            for c, v in g:
                print(f"{k}\t{c.label}\t{_value_text(v)}", file=out)
    if args.strict and res.undecided:
        return EXIT_UNDECIDED
    return EXIT_OK


def cmd_topk(args, out) -> int:
    pdb = _pdb(args)
    res = inference.topk_query(pdb, load_query(args.query), _partition(args), args.k, **_mc(args))
    if args.format == "json":
        rows = [{"label": r.cell.label, "p": _value_json(r.value), "overlaps": list(r.overlaps)} for r in res]
        print(_dump(rows), file=out)
    else:
        for r in res:
            extra = f"\toverlaps: {', '.join(r.overlaps)}" if r.overlaps else ""
            print(f"{r.cell.label}\t{_value_text(r.value)}{extra}", file=out)
    return EXIT_OK


def cmd_condition(args, out) -> int:
    pdb = _pdb(args)
    if not isinstance(pdb, FinitePdb):
        raise CliError("conditioning needs a finite PDB")
    print(_dump(inference.condition(pdb, _event(args)).to_json()), file=out)
    return EXIT_OK


def cmd_sample(args, out) -> int:
    pdb = _pdb(args)
    for i in range(args.start, args.start + args.n):
        print(_dump(instance_to_json(pdb.sample(args.seed, i))), file=out)
    return EXIT_OK


def cmd_demo_types(args, out) -> int:
    pdb = _pdb(args) if args.pdb else None
    if pdb is not None and not isinstance(pdb, FinitePdb):
        raise CliError("demo-types takes a finite PDB")
    rep = inference.classify_demo(pdb)
    print(rep.text, end="", file=out)
    return EXIT_OK if rep.threshold_separated and rep.conditioning_separated else EXIT_RUNTIME


# -- argument parsing -------------------------------------------------------


def _level(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _alpha(text: str) -> str:
    try:
        v = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be a number or p/q") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1]")
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppdb", description="Probabilistic bag databases: queries, exact and sampled probabilities.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, pdb=True, query=True, fmt=True):
        p.add_argument("-s", "--schema", help="schema JSON (optional when the PDB file embeds one)")
        if pdb:
            p.add_argument("-p", "--pdb", required=True, help="PDB JSON file")
        if query:
            p.add_argument("-q", "--query", help="query or datalog program (file or inline text); default: identity")
        if fmt:
            p.add_argument("--format", choices=("table", "json"), default="table")

    def mc(p):
        p.add_argument("--samples", type=_positive, default=10_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--level", type=_level, default=inference.DEFAULT_LEVEL)
        p.add_argument("--threads", type=_positive, default=1)

    p = sub.add_parser("eval", help="evaluate a query on one instance")
    p.add_argument("-s", "--schema", required=True)
    p.add_argument("-d", "--data", action="append", help="R=path.csv, path.csv or path.jsonl; repeatable")
    p.add_argument("-q", "--query", help="query or datalog program (file or inline text)")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("exact", help="exact probability of an event of the query output")
    common(p)
    p.add_argument("-e", "--event", required=True)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("estimate", help="Monte Carlo estimate of an event of the query output")
    common(p, fmt=False)
    p.add_argument("-e", "--event", required=True)
    mc(p)
    p.set_defaults(func=cmd_estimate)

    for name, func, help_ in (
        ("marginals", cmd_marginals, "per-cell probability of a hit"),
        ("threshold", cmd_threshold, "cells with marginal at least alpha"),
        ("topk", cmd_topk, "the k cells of largest marginal"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--partition", required=True, help="partition JSON")
        mc(p)
        if name == "marginals":
            p.add_argument("--remainder", action="store_true", help="also report the remainder cell")
        if name == "threshold":
            p.add_argument("--alpha", type=_alpha, required=True)
            p.add_argument("--strict", action="store_true", help="exit 4 if any cell is undecided")
        if name == "topk":
            p.add_argument("-k", type=_positive, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("condition", help="condition a finite PDB on an event")
    common(p, query=False, fmt=False)
    p.add_argument("-e", "--event", required=True)
    p.set_defaults(func=cmd_condition)

    p = sub.add_parser("sample", help="draw worlds as JSON lines")
    common(p, query=False, fmt=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-n", type=_nonneg, default=1)
    p.add_argument("--start", type=_nonneg, default=0, help="first draw index")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("demo-types", help="run the threshold and conditioning separation demos")
    p.add_argument("-s", "--schema")
    p.add_argument("-p", "--pdb", help="optional finite PDB to check for the one-world case")
    p.set_defaults(func=cmd_demo_types)
    return parser


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except ParseError as e:
        print(e.render(), file=err)
        return EXIT_INPUT
    except _RUNTIME as e:
        print(f"error: {e.code}: {e}", file=err)
        return EXIT_RUNTIME
    except PpdbError as e:
        print(f"error: {e.code}: {e}", file=err)
        return EXIT_INPUT
    except CliError as e:
        print(f"error: {e}", file=err)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: cannot read {e.filename}: {e.strerror}", file=err)
        return EXIT_INPUT
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON at {e.lineno}:{e.colno}: {e.msg}", file=err)
        return EXIT_INPUT
    except (ValueError, KeyError, TypeError) as e:
        print(f"error: malformed input: {e}", file=err)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
