"""Big-step evaluation over an in-memory database.

Strict primitives propagate null, the connectives use Kleene's
three-valued tables, and a null condition behaves like false in both
``where`` and ``if``.
"""

from __future__ import annotations

import enum

from .ast import (
    Base,
    BaseTy,
    Case,
    Comp,
    Const,
    EmptySet,
    If,
    IsEmpty,
    IsNull,
    Mode,
    NoneLit,
    NullLit,
    Option,
    Prim,
    Project,
    Record,
    RecordCons,
    SetTy,
    Singleton,
    SomeLit,
    TableRef,
    Term,
    Ty,
    Union,
    Value,
    Var,
    VConst,
    VNone,
    VNull,
    VRecord,
    VSet,
    VSome,
    Where,
)
from .data import Database


class EvalErrorKind(enum.Enum):
    UNBOUND_VAR = "UnboundVar"
    STUCK_TERM = "StuckTerm"
    DIVIDE_BY_ZERO = "DivideByZero"
    UNKNOWN_TABLE = "UnknownTable"


class EvalError(Exception):
    def __init__(self, kind: EvalErrorKind, detail: str):
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail


# --------------------------------------------------------------------------
# Three-valued logic; None stands for the unknown truth value.
# --------------------------------------------------------------------------


def k3_and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def k3_or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def k3_not(a):
    return None if a is None else not a


def k3_tables() -> dict[str, dict]:
    vals = (True, False, None)
    return {
        "and": {(a, b): k3_and(a, b) for a in vals for b in vals},
        "or": {(a, b): k3_or(a, b) for a in vals for b in vals},
        "not": {a: k3_not(a) for a in vals},
    }


def _truth(v: Value):
    if v is VNull:
        return None
    if isinstance(v, VConst) and v.ty is BaseTy.BOOL:
        return v.value
    raise EvalError(EvalErrorKind.STUCK_TERM, f"expected a boolean, got {v!r}")


def _from_truth(t) -> Value:
    return VNull if t is None else VConst(t, BaseTy.BOOL)


# --------------------------------------------------------------------------
# Primitives
# --------------------------------------------------------------------------


def _divide(a, b, ty: BaseTy):
    if b == 0:
        raise EvalError(EvalErrorKind.DIVIDE_BY_ZERO, f"{a} / {b}")
    if ty is BaseTy.INT:
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    return a / b


_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "=": lambda a, b: a == b,
    "<>": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def apply_prim(op: str, args: list[Value]) -> Value:
    """Apply primitive ``op`` to already evaluated arguments."""
    if op == "&&":
        return _from_truth(k3_and(_truth(args[0]), _truth(args[1])))
    if op == "||":
        return _from_truth(k3_or(_truth(args[0]), _truth(args[1])))
    if op == "!":
        return _from_truth(k3_not(_truth(args[0])))
    if any(a is VNull for a in args):
        return VNull
    a, b = args
    if not (isinstance(a, VConst) and isinstance(b, VConst)):
        raise EvalError(EvalErrorKind.STUCK_TERM, f"{op} applied to {a!r}, {b!r}")
    if op == "/":
        return VConst(_divide(a.value, b.value, a.ty), a.ty)
    result = _BINARY[op](a.value, b.value)
    if op in ("+", "-", "*"):
        return VConst(result, a.ty)
    return VConst(result, BaseTy.BOOL)


# --------------------------------------------------------------------------
# Default values
# --------------------------------------------------------------------------

_DEFAULTS = {BaseTy.INT: 0, BaseTy.BOOL: False, BaseTy.STRING: "", BaseTy.FLOAT: 0.0}


def default_value(t: Ty) -> Value:
    match t:
        case Base(b):
            return VConst(_DEFAULTS[b], b)
        case SetTy():
            return VSet()
        case Record(fields):
            return VRecord(tuple((l, default_value(ft)) for l, ft in fields))
        case Option():
            return VNone
    raise ValueError(f"no default value for {t}")


# --------------------------------------------------------------------------
# Table views
# --------------------------------------------------------------------------


def table_value(mode: Mode, db: Database, name: str) -> VSet:
    """The contents of a table as seen from ``mode`` (see ``table_row_type``)."""
    if name not in db.schema:
        raise EvalError(EvalErrorKind.UNKNOWN_TABLE, f"unknown table {name}")
    cols = db.schema.columns(name)
    rows = []
    for row in db.table(name):
        fields = []
        for col, v in zip(cols, row):
            if col.nullable and mode is Mode.NRC_OPT:
                v = VNone if v is VNull else VSome(v)
            elif col.nullable and mode is Mode.NRC:
                if v is VNull:
                    v = VRecord((("isnull", VConst(True, BaseTy.BOOL)), ("val", default_value(Base(col.ty)))))
                else:
                    v = VRecord((("isnull", VConst(False, BaseTy.BOOL)), ("val", v)))
            fields.append((col.name, v))
        rows.append(VRecord(tuple(fields)))
    return VSet(tuple(rows))


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


class Evaluator:
    def __init__(self, mode: Mode, db: Database | None):
        self.mode = mode
        self.db = db
        self._tables: dict[str, VSet] = {}

    def table(self, name: str) -> VSet:
        if name not in self._tables:
            if self.db is None:
                raise EvalError(EvalErrorKind.UNKNOWN_TABLE, f"no database for table {name}")
            self._tables[name] = table_value(self.mode, self.db, name)
        return self._tables[name]

    def set_of(self, env, m) -> VSet:
        v = self.eval(env, m)
        if not isinstance(v, VSet):
            raise EvalError(EvalErrorKind.STUCK_TERM, f"expected a set, got {v!r}")
        return v

    def eval(self, env: dict[str, Value], m: Term) -> Value:
        match m:
            case Var(x):
                if x not in env:
                    raise EvalError(EvalErrorKind.UNBOUND_VAR, f"unbound variable {x}")
                return env[x]
            case Const(value, ty):
                return VConst(value, ty)
            case Prim(op, args):
                return apply_prim(op, [self.eval(env, a) for a in args])
            case RecordCons(fields):
                return VRecord(tuple((l, self.eval(env, t)) for l, t in fields))
            case Project(t, label):
                r = self.eval(env, t)
                if not isinstance(r, VRecord):
                    raise EvalError(EvalErrorKind.STUCK_TERM, f"projection .{label} from {r!r}")
                try:
                    return r.get(label)
                except KeyError:
                    raise EvalError(EvalErrorKind.STUCK_TERM, f"no field {label} in {r!r}") from None
            case EmptySet():
                return VSet()
            case Singleton(t):
                return VSet((self.eval(env, t),))
            case Union(a, b):
                return VSet(self.set_of(env, a).elements + self.set_of(env, b).elements)
            case Comp(head, x, source):
                out = []
                for v in self.set_of(env, source):
                    out.extend(self.set_of({**env, x: v}, head).elements)
                return VSet(tuple(out))
            case Where(body, cond):
                if _truth(self.eval(env, cond)) is True:
                    return self.set_of(env, body)
                return VSet()
            case IsEmpty(t):
                return VConst(len(self.set_of(env, t)) == 0, BaseTy.BOOL)
            case If(c, a, b):
                if _truth(self.eval(env, c)) is True:
                    return self.eval(env, a)
                return self.eval(env, b)
            case NoneLit():
                return VNone
            case SomeLit(t):
                return VSome(self.eval(env, t))
            case Case(s, n, x, sm):
                v = self.eval(env, s)
                if v is VNone:
                    return self.eval(env, n)
                if isinstance(v, VSome):
                    return self.eval({**env, x: v.value}, sm)
                raise EvalError(EvalErrorKind.STUCK_TERM, f"case on non-option {v!r}")
            case NullLit():
                return VNull
            case IsNull(t):
                return VConst(self.eval(env, t) is VNull, BaseTy.BOOL)
            case TableRef(name):
                return self.table(name)
        raise EvalError(EvalErrorKind.STUCK_TERM, f"cannot evaluate {m!r}")


def evaluate(mode: Mode, db: Database | None, env: dict[str, Value] | None, m: Term) -> Value:
    return Evaluator(mode, db).eval(dict(env or {}), m)
