"""SQL for normalized flat queries, plus a tiny reference evaluator.

Each branch of a normal form becomes one ``SELECT``: comprehension
generators make the ``FROM`` list, ``where`` filters are conjoined into
``WHERE`` and the singleton record supplies the projections.  A single
branch is emitted with ``SELECT DISTINCT``; several are joined by
``UNION``.  Both keep the set semantics of the calculus.

``sql_oracle_eval`` executes the ``SqlQuery`` structure directly on a
``Database`` with SQL's own null rules.  It shares no code with the
term evaluator so that it can serve as an independent check.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

from .ast import (
    BaseTy,
    Comp,
    Const,
    EmptySet,
    If,
    IsEmpty,
    IsNull,
    Mode,
    NullLit,
    Prim,
    Project,
    Record,
    RecordCons,
    SetTy,
    Singleton,
    TableRef,
    Term,
    Union,
    Var,
    VConst,
    VNull,
    VRecord,
    VSet,
    Where,
)
from .data import Database, Schema
from .rewrite import is_sql_normal_form
from .typecheck import infer_partial


class SqlGenError(ValueError):
    pass


# --------------------------------------------------------------------------
# SQL syntax
# --------------------------------------------------------------------------


class SqlExpr:
    __slots__ = ()


@dataclass(frozen=True)
class SqlLit(SqlExpr):
    value: object
    ty: BaseTy


@dataclass(frozen=True)
class SqlNull(SqlExpr):
    pass


@dataclass(frozen=True)
class SqlCol(SqlExpr):
    alias: str
    column: str


@dataclass(frozen=True)
class SqlBin(SqlExpr):
    op: str  # SQL spelling: + - * / = <> < <= > >= AND OR
    left: SqlExpr
    right: SqlExpr


@dataclass(frozen=True)
class SqlNot(SqlExpr):
    arg: SqlExpr


@dataclass(frozen=True)
class SqlIsNull(SqlExpr):
    arg: SqlExpr


@dataclass(frozen=True)
class SqlCase(SqlExpr):
    cond: SqlExpr
    then: SqlExpr
    else_: SqlExpr


@dataclass(frozen=True)
class SqlNotExists(SqlExpr):
    """Correlated emptiness test; may refer to aliases of enclosing branches."""

    branches: tuple[SelectBranch, ...]


@dataclass(frozen=True)
class SelectBranch:
    projections: tuple[tuple[str, SqlExpr], ...]
    from_: tuple[tuple[str, str], ...]  # (table, alias)
    where: tuple[SqlExpr, ...] = ()


@dataclass(frozen=True)
class SqlQuery:
    labels: tuple[str, ...]
    branches: tuple[SelectBranch, ...]


_OPS = {
    "+": "+", "-": "-", "*": "*", "/": "/",
    "=": "=", "<>": "<>", "<": "<", "<=": "<=", ">": ">", ">=": ">=",
    "&&": "AND", "||": "OR",
}


# --------------------------------------------------------------------------
# Translation from normal forms
# --------------------------------------------------------------------------


class _Builder:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.used: set[str] = set()

    def alias(self, var: str) -> str:
        name = var
        for i in itertools.count(2):
            if name not in self.used:
                break
            name = f"{var}_{i}"
        self.used.add(name)
        return name

    def branches(self, m: Term, scope: dict) -> list[SelectBranch]:
        if isinstance(m, EmptySet):
            return []
        if isinstance(m, Union):
            return self.branches(m.left, scope) + self.branches(m.right, scope)
        return [self.branch(m, scope, [], [])]

    def branch(self, m: Term, scope: dict, from_: list, where: list) -> SelectBranch:
        match m:
            case Comp(body, x, TableRef(t)):
                a = self.alias(x)
                return self.branch(body, {**scope, x: (t, a)}, from_ + [(t, a)], where)
            case Where(body, cond):
                return self.branch(body, scope, from_, where + [self.scalar(cond, scope)])
            case Singleton(RecordCons(fields)):
                proj = tuple((l, self.scalar(e, scope)) for l, e in fields)
                return SelectBranch(proj, tuple(from_), tuple(where))
            case Singleton(Var(x)):
                t, a = scope[x]
                proj = tuple((c.name, SqlCol(a, c.name)) for c in self.schema.columns(t))
                return SelectBranch(proj, tuple(from_), tuple(where))
            case TableRef(t):
                a = self.alias(t)
                proj = tuple((c.name, SqlCol(a, c.name)) for c in self.schema.columns(t))
                return SelectBranch(proj, tuple(from_) + ((t, a),), tuple(where))
        raise SqlGenError(f"not a comprehension branch: {m!r}")

    def scalar(self, m: Term, scope: dict) -> SqlExpr:
        match m:
            case Const(value, ty):
                return SqlLit(value, ty)
            case NullLit():
                return SqlNull()
            case Project(Var(x), label):
                return SqlCol(scope[x][1], label)
            case Prim("!", (a,)):
                return SqlNot(self.scalar(a, scope))
            case Prim(op, (a, b)):
                return SqlBin(_OPS[op], self.scalar(a, scope), self.scalar(b, scope))
            case IsNull(a):
                return SqlIsNull(self.scalar(a, scope))
            case If(c, a, b):
                return SqlCase(self.scalar(c, scope), self.scalar(a, scope), self.scalar(b, scope))
            case IsEmpty(q):
                return SqlNotExists(tuple(self.branches(q, scope)))
        raise SqlGenError(f"not a scalar expression: {m!r}")


def _result_labels(m: Term, schema: Schema) -> tuple[str, ...]:
    ty = infer_partial(Mode.NRC_NULL, schema, {}, m)
    if isinstance(ty, SetTy) and isinstance(ty.elem, Record):
        return ty.elem.labels
    return ()


def to_sql(m: Term, schema: Schema) -> SqlQuery:
    """Translate a normal form; anything else raises ``SqlGenError``."""
    if not is_sql_normal_form(m, schema):
        raise SqlGenError("query is not in SQL normal form; normalize it first")
    labels = _result_labels(m, schema)
    b = _Builder(schema)
    branches = []
    for br in b.branches(m, {}):
        cols = dict(br.projections)
        branches.append(SelectBranch(tuple((l, cols[l]) for l in labels), br.from_, br.where))
    return SqlQuery(labels, tuple(branches))


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

_PLAIN_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def quote_ident(name: str) -> str:
    if _PLAIN_IDENT.fullmatch(name):
        return name
    return '"' + name.replace('"', '""') + '"'


def render_literal(value, ty: BaseTy) -> str:
    if ty is BaseTy.BOOL:
        return "TRUE" if value else "FALSE"
    if ty is BaseTy.STRING:
        return "'" + value.replace("'", "''") + "'"
    if ty is BaseTy.FLOAT:
        if not math.isfinite(value):
            raise SqlGenError(f"no SQL literal for {value}")
        text = repr(float(value))
    else:
        text = str(value)
    return f"({text})" if text.startswith("-") else text


def render_expr(e: SqlExpr, nested: bool = False) -> str:
    match e:
        case SqlLit(value, ty):
            return render_literal(value, ty)
        case SqlNull():
            return "NULL"
        case SqlCol(alias, column):
            return f"{quote_ident(alias)}.{quote_ident(column)}"
        case SqlBin(op, a, b):
            text = f"{render_expr(a, True)} {op} {render_expr(b, True)}"
            return f"({text})" if nested else text
        case SqlNot(a):
            return f"(NOT {render_expr(a, True)})"
        case SqlIsNull(a):
            return f"({render_expr(a, True)} IS NULL)"
        case SqlCase(c, a, b):
            return f"CASE WHEN {render_expr(c)} THEN {render_expr(a)} ELSE {render_expr(b)} END"
        case SqlNotExists(branches):
            if not branches:
                return "TRUE"
            inner = " UNION ".join(_render_branch(br, "SELECT 1") for br in branches)
            return f"(NOT EXISTS ({inner}))"
    raise SqlGenError(f"unknown SQL expression {e!r}")


def _render_branch(br: SelectBranch, select: str) -> str:
    parts = [select]
    if br.from_:
        parts.append("FROM " + ", ".join(f"{quote_ident(t)} AS {quote_ident(a)}" for t, a in br.from_))
    if br.where:
        nested = len(br.where) > 1
        parts.append("WHERE " + " AND ".join(render_expr(c, nested) for c in br.where))
    return " ".join(parts)


def _select_list(br: SelectBranch) -> str:
    if not br.projections:
        return "NULL AS _unit"
    return ", ".join(f"{render_expr(e)} AS {quote_ident(l)}" for l, e in br.projections)


def render(q: SqlQuery) -> str:
    if not q.branches:
        cols = ", ".join(f"NULL AS {quote_ident(l)}" for l in q.labels) or "NULL AS _unit"
        return f"SELECT {cols} WHERE FALSE"
    if len(q.branches) == 1:
        br = q.branches[0]
        return _render_branch(br, "SELECT DISTINCT " + _select_list(br))
    return " UNION ".join(_render_branch(br, "SELECT " + _select_list(br)) for br in q.branches)


def render_statement(q: SqlQuery) -> str:
    return render(q) + ";\n"


# --------------------------------------------------------------------------
# Reference evaluator
# --------------------------------------------------------------------------
#
# Scalars evaluate to a pair (python value, BaseTy), or None for NULL.


def _and3(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _or3(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _bool(x):
    return None if x is None else x[0]


def _as_bool(b):
    return None if b is None else (b, BaseTy.BOOL)


_CMP = {
    "=": lambda a, b: a == b,
    "<>": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _arith(op, a, b, ty):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise SqlGenError("division by zero")
    if ty is BaseTy.INT:
        # SQL integer division truncates toward zero
        q = abs(a) // abs(b)
        return q if (a < 0) == (b < 0) else -q
    return a / b


class _Oracle:
    def __init__(self, db: Database):
        self.db = db

    def rows(self, table: str) -> list[dict]:
        if table not in self.db.schema:
            raise SqlGenError(f"unknown table {table}")
        cols = self.db.schema.columns(table)
        out = []
        for row in self.db.table(table):
            out.append({c.name: (None if v is VNull else (v.value, c.ty)) for c, v in zip(cols, row)})
        return out

    def expr(self, e: SqlExpr, env: dict):
        match e:
            case SqlLit(value, ty):
                return (value, ty)
            case SqlNull():
                return None
            case SqlCol(alias, column):
                row = env[alias]
                if column not in row:
                    raise SqlGenError(f"unknown column {alias}.{column}")
                return row[column]
            case SqlNot(a):
                b = _bool(self.expr(a, env))
                return _as_bool(None if b is None else not b)
            case SqlIsNull(a):
                return (self.expr(a, env) is None, BaseTy.BOOL)
            case SqlBin("AND", a, b):
                return _as_bool(_and3(_bool(self.expr(a, env)), _bool(self.expr(b, env))))
            case SqlBin("OR", a, b):
                return _as_bool(_or3(_bool(self.expr(a, env)), _bool(self.expr(b, env))))
            case SqlBin(op, a, b):
                x, y = self.expr(a, env), self.expr(b, env)
                if x is None or y is None:
                    return None
                if op in _CMP:
                    return (_CMP[op](x[0], y[0]), BaseTy.BOOL)
                return (_arith(op, x[0], y[0], x[1]), x[1])
            case SqlCase(c, a, b):
                return self.expr(a, env) if _bool(self.expr(c, env)) is True else self.expr(b, env)
            case SqlNotExists(branches):
                return (not any(True for br in branches for _ in self.matches(br, env)), BaseTy.BOOL)
        raise SqlGenError(f"unknown SQL expression {e!r}")

    def matches(self, br: SelectBranch, outer: dict):
        tables = [self.rows(t) for t, _ in br.from_]
        for combo in itertools.product(*tables):
            env = dict(outer)
            env.update({a: r for (_, a), r in zip(br.from_, combo)})
            if all(_bool(self.expr(c, env)) is True for c in br.where):
                yield env

    def query(self, q: SqlQuery) -> VSet:
        out = []
        for br in q.branches:
            for env in self.matches(br, {}):
                fields = []
                for label, e in br.projections:
                    v = self.expr(e, env)
                    fields.append((label, VNull if v is None else VConst(v[0], v[1])))
                out.append(VRecord(tuple(fields)))
        return VSet(tuple(out))


def sql_oracle_eval(q: SqlQuery, db: Database) -> VSet:
    return _Oracle(db).query(q)


def compile_sql(m: Term, schema: Schema, fuel: int = 10_000) -> SqlQuery:
    """Normalize ``m`` in NRC_null and translate the result."""
    from .rewrite import normalize

    n, _ = normalize(Mode.NRC_NULL, m, fuel=fuel, schema=schema)
    return to_sql(n, schema)
