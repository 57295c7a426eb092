"""Command-line driver.

Exit status is 0 on success, 1 for problems with the user's input (syntax,
typing, data, non-translatable queries) and 2 for internal failures.  Only
the requested artifact goes to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .ast import Mode, Value, VConst, VNone, VNull, VRecord, VSet, VSome
from .data import Database, LoadError, Schema, load_database_file
from .evaluator import EvalError, EvalErrorKind, evaluate
from .handlers import decode_host_side, desugar_db_side, nullable_labels, parse_handler
from .rewrite import FuelExhausted, Rewriter, format_trace
from .sqlgen import SqlGenError, render_statement, sql_oracle_eval, to_sql
from .surface import ParseError, format_type, format_value, parse_mode, parse_term, pretty
from .translate import TranslationError, translate
from .typecheck import TypingError, typecheck

log = logging.getLogger("nullnrc")


class UserError(Exception):
    pass


def value_to_json(v: Value):
    match v:
        case VConst(value, _):
            return value
        case VSome(inner):
            return {"some": value_to_json(inner)}
        case VRecord(fields):
            return {l: value_to_json(x) for l, x in fields}
        case VSet(elements):
            return [value_to_json(x) for x in elements]
    if v is VNull:
        return None
    if v is VNone:
        return {"none": True}
    raise ValueError(f"cannot encode {v!r}")


def _mode(text: str) -> Mode:
    try:
        return parse_mode(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("fuel must be positive")
    return n


def _default_fuel() -> int:
    raw = os.environ.get("NULLNRC_FUEL")
    if raw is None:
        return 10_000
    try:
        return _positive(raw)
    except (ValueError, argparse.ArgumentTypeError):
        return 10_000


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nullnrc", description="Nested relational calculus with nulls.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("query", help="query file ('-' for stdin)")
    common.add_argument("--mode", type=_mode, default=Mode.NRC_NULL, help="nrc, opt or null (default null)")
    common.add_argument("--db", help="database JSON file (also supplies the schema)")
    common.add_argument("--fuel", type=_positive, default=_default_fuel(), help="rewrite step budget")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--warn-duplicates", action="store_true", help="report duplicate input rows")
    common.add_argument("--json-output", action="store_true", help="print values as JSON")
    common.add_argument("--handler", help="null handler file")
    for name, text in [
        ("check", "print the type of a query"),
        ("eval", "evaluate a query against a database"),
        ("normalize", "rewrite a query to normal form"),
        ("trace", "like normalize, also listing every rewrite step"),
        ("sql", "normalize and print SQL"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=text)
        if name == "sql":
            sp.add_argument("--emit-only", action="store_true", help="skip the built-in oracle check")
    tp = sub.add_parser("translate", parents=[common], help="translate between calculi")
    tp.add_argument("--from", dest="source", type=_mode, required=True)
    tp.add_argument("--to", dest="target", type=_mode, required=True)
    return p


class Session:
    def __init__(self, args):
        self.args = args
        self.db: Database | None = None
        self.schema = Schema({})
        if args.db:
            self.db = load_database_file(args.db, warn_duplicates=args.warn_duplicates)
            self.schema = self.db.schema

    def query(self):
        path = self.args.query
        if path == "-":
            return parse_term(sys.stdin.read(), "<stdin>")
        with open(path, encoding="utf-8") as f:
            return parse_term(f.read(), path)

    def need_db(self) -> Database:
        if self.db is None:
            raise UserError(f"{self.args.command} needs --db")
        return self.db

    def normalize(self, mode, m):
        return Rewriter(mode, self.schema).normalize(m, self.args.fuel)

    def handler(self, m, ty):
        if self.args.mode is not Mode.NRC_NULL:
            raise UserError("handlers apply to NRC_null queries")
        with open(self.args.handler, encoding="utf-8") as f:
            src = f.read()
        n, _ = self.normalize(Mode.NRC_NULL, m)
        try:
            return parse_handler(src, ty, nullable_labels(n, self.schema), self.args.handler)
        except ValueError as e:
            raise UserError(str(e)) from None

    def show(self, v: Value) -> str:
        if self.args.json_output:
            return json.dumps(value_to_json(v))
        return format_value(v)


def run(args) -> str:
    s = Session(args)
    mode = args.mode
    m = s.query()
    cmd = args.command
    if cmd == "translate":
        if args.source is args.target:
            raise UserError("--from and --to must differ")
        ty = typecheck(args.source, s.schema, {}, m)
        return pretty(translate(m, args.source, args.target, s.schema, expected=ty)) + "\n"
    ty = typecheck(mode, s.schema, {}, m)
    if cmd == "check":
        return format_type(ty) + "\n"
    if cmd == "eval":
        db = s.need_db()
        v = evaluate(mode, db, {}, m)
        if args.handler:
            v = decode_host_side(s.handler(m, ty), v, ty)
        return s.show(v) + "\n"
    if cmd in ("normalize", "trace"):
        n, trace = s.normalize(mode, m)
        text = pretty(n) + "\n"
        return format_trace(trace) + text if cmd == "trace" else text
    if cmd == "sql":
        if mode is not Mode.NRC_NULL:
            raise UserError("SQL generation works on NRC_null queries")
        if args.handler:
            m = desugar_db_side(s.handler(m, ty), m)
        n, _ = s.normalize(mode, m)
        sql = to_sql(n, s.schema)
        if not args.emit_only:
            db = s.need_db()
            if sql_oracle_eval(sql, db) != evaluate(mode, db, {}, m):
                raise AssertionError("generated SQL disagrees with the evaluator")
        return render_statement(sql)
    raise UserError(f"unknown command {cmd}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # warnings go to this invocation's stderr whatever the host configured
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("nullnrc: %(message)s"))
    log.addHandler(handler)
    log.propagate = False
    try:
        return _main(args)
    finally:
        log.removeHandler(handler)
        log.propagate = True


def _main(args) -> int:
    try:
        out = run(args)
    except FuelExhausted as e:
        tail = format_trace(e.trace[-5:])
        print(f"error: {e}; last steps:\n{tail}", end="", file=sys.stderr)
        return 1
    except EvalError as e:
        if e.kind is EvalErrorKind.STUCK_TERM:
            print(f"internal error: {e}", file=sys.stderr)
            return 2
        print(f"error: {e}", file=sys.stderr)
        return 1
    except TypingError as e:
        print(f"type error: {e.kind.value}: {e.detail}", file=sys.stderr)
        return 1
    except (ParseError, LoadError, UserError, TranslationError, SqlGenError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - last-resort boundary
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out)
    else:
        sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
