"""Type checking for NRC, NRC with options and NRC with implicit nulls.

The rules are syntax directed except for ``[]``, ``none`` and ``null``,
whose element/payload/base type is left as a unification variable and
fixed by the surrounding term.  A query whose type still mentions such a
variable is rejected as ambiguous; unresolved variables that never reach
the result type default to ``int``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

from .ast import (
    BOOL,
    INT,
    Base,
    BaseTy,
    Case,
    Comp,
    Const,
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
    Var,
    EmptySet,
    Where,
)
from .ast import subterms
from .data import Schema


class Strictness(enum.Enum):
    STRICT = "strict"
    THREE_VALUED = "three-valued"
    NULL_TEST = "null-test"


@dataclass(frozen=True)
class PrimSig:
    name: str
    arg_types: tuple[BaseTy, ...]
    result_type: BaseTy
    strictness: Strictness


ARITH_OPS = ("+", "-", "*", "/")
COMPARE_OPS = ("=", "<>", "<", "<=", ">", ">=")
LOGIC_OPS = ("&&", "||", "!")
ALL_OPS = ARITH_OPS + COMPARE_OPS + LOGIC_OPS

_NUMERIC = (BaseTy.INT, BaseTy.FLOAT)


def _build_signatures() -> tuple[PrimSig, ...]:
    sigs = []
    for op in ARITH_OPS:
        for b in _NUMERIC:
            sigs.append(PrimSig(op, (b, b), b, Strictness.STRICT))
    for op in COMPARE_OPS:
        for b in BaseTy:
            sigs.append(PrimSig(op, (b, b), BaseTy.BOOL, Strictness.STRICT))
    sigs.append(PrimSig("&&", (BaseTy.BOOL, BaseTy.BOOL), BaseTy.BOOL, Strictness.THREE_VALUED))
    sigs.append(PrimSig("||", (BaseTy.BOOL, BaseTy.BOOL), BaseTy.BOOL, Strictness.THREE_VALUED))
    sigs.append(PrimSig("!", (BaseTy.BOOL,), BaseTy.BOOL, Strictness.THREE_VALUED))
    return tuple(sigs)


SIGNATURES = _build_signatures()


def strictness(op: str) -> Strictness:
    return Strictness.THREE_VALUED if op in LOGIC_OPS else Strictness.STRICT


def prim_arity(op: str) -> int:
    return 1 if op == "!" else 2


class TypeErrorKind(enum.Enum):
    UNBOUND_VAR = "UnboundVar"
    FIELD_MISSING = "FieldMissing"
    MISMATCH = "Mismatch"
    MODE_VIOLATION = "ModeViolation"
    NULL_AT_NON_BASE = "NullAtNonBase"
    ARITY_MISMATCH = "ArityMismatch"
    UNKNOWN_TABLE = "UnknownTable"


class TypingError(Exception):
    def __init__(self, kind: TypeErrorKind, detail: str, at=None):
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail
        self.at = at


def table_row_type(mode: Mode, schema: Schema, name: str) -> Record:
    """Row type of a table as seen from ``mode``.

    Nullable columns are plain base types under implicit nulls, options
    under explicit nulls, and ``{isnull: bool, val: b}`` records in NRC.
    """
    if name not in schema:
        raise TypingError(TypeErrorKind.UNKNOWN_TABLE, f"unknown table {name}")
    fields = []
    for col in schema.columns(name):
        ty: Ty = Base(col.ty)
        if col.nullable:
            if mode is Mode.NRC_OPT:
                ty = Option(ty)
            elif mode is Mode.NRC:
                ty = Record((("isnull", BOOL), ("val", ty)))
        fields.append((col.name, ty))
    return Record(tuple(fields))


# --------------------------------------------------------------------------
# Unification variables
# --------------------------------------------------------------------------

ANY, BASE, NUM = 0, 1, 2


@dataclass(frozen=True)
class TVar(Ty):
    id: int

    def __str__(self):
        return f"'t{self.id}"


class Checker:
    """One checking session: holds the unifier state for a single query."""

    def __init__(self, mode: Mode, schema: Schema | None):
        self.mode = mode
        self.schema = schema if schema is not None else Schema({})
        self.binding: dict[int, Ty] = {}
        self.kind: dict[int, int] = {}
        self.from_null: set[int] = set()
        self.none_types: dict[tuple[int, ...], Ty] = {}
        # fields projected from a variable before its record type is known
        self.pending: dict[int, dict[str, Ty]] = {}
        self._ids = itertools.count()

    # -- unifier ---------------------------------------------------------

    def fresh(self, kind=ANY, from_null=False) -> TVar:
        v = TVar(next(self._ids))
        self.kind[v.id] = kind
        if from_null:
            self.from_null.add(v.id)
        return v

    def resolve(self, t: Ty) -> Ty:
        while isinstance(t, TVar) and t.id in self.binding:
            t = self.binding[t.id]
        return t

    def zonk(self, t: Ty, default: Ty | None = None) -> Ty:
        t = self.resolve(t)
        match t:
            case TVar():
                return default if default is not None else t
            case Record(fields):
                return Record(tuple((l, self.zonk(ft, default)) for l, ft in fields))
            case SetTy(elem):
                return SetTy(self.zonk(elem, default))
            case Option(inner):
                return Option(self.zonk(inner, default))
        return t

    def _occurs(self, v: TVar, t: Ty) -> bool:
        t = self.resolve(t)
        if t == v:
            return True
        match t:
            case Record(fields):
                return any(self._occurs(v, ft) for _, ft in fields)
            case SetTy(elem):
                return self._occurs(v, elem)
            case Option(inner):
                return self._occurs(v, inner)
        return False

    def _bind(self, v: TVar, t: Ty) -> None:
        kind = self.kind[v.id]
        if isinstance(t, TVar):
            self.kind[t.id] = max(self.kind[t.id], kind)
            if v.id in self.from_null:
                self.from_null.add(t.id)
        elif kind != ANY:
            if not isinstance(t, Base):
                if v.id in self.from_null:
                    raise TypingError(
                        TypeErrorKind.NULL_AT_NON_BASE, f"null used at non-base type {self.zonk(t)}"
                    )
                raise TypingError(TypeErrorKind.MISMATCH, f"expected a base type, got {self.zonk(t)}")
            if kind == NUM and t.b not in _NUMERIC:
                raise TypingError(TypeErrorKind.MISMATCH, f"expected int or float, got {t}")
        elif self._occurs(v, t):
            raise TypingError(TypeErrorKind.MISMATCH, "infinite type")
        self.binding[v.id] = t
        fields = self.pending.pop(v.id, None)
        if fields:
            for label, ft in fields.items():
                self.unify(self.project(t, label), ft)

    def project(self, t: Ty, label: str) -> Ty:
        t = self.resolve(t)
        if isinstance(t, Record):
            ft = t.field(label)
            if ft is None:
                raise TypingError(TypeErrorKind.FIELD_MISSING, f"no field {label} in {self.zonk(t)}")
            return ft
        if isinstance(t, TVar) and self.kind[t.id] == ANY:
            fields = self.pending.setdefault(t.id, {})
            if label not in fields:
                fields[label] = self.fresh()
            return fields[label]
        raise TypingError(TypeErrorKind.MISMATCH, f"cannot project {label} from {self.zonk(t)}")

    def close_records(self) -> None:
        """Give every still-unknown projected type the record of its used fields."""
        while self.pending:
            vid = next(iter(self.pending))
            fields = self.pending[vid]
            self.unify(TVar(vid), Record(tuple(fields.items())))

    def unify(self, a: Ty, b: Ty) -> None:
        a, b = self.resolve(a), self.resolve(b)
        if a is b or a == b and not isinstance(a, (Record, SetTy, Option)):
            return
        if isinstance(a, TVar):
            self._bind(a, b)
            return
        if isinstance(b, TVar):
            self._bind(b, a)
            return
        if isinstance(a, Record) and isinstance(b, Record):
            if set(a.labels) != set(b.labels):
                raise TypingError(
                    TypeErrorKind.MISMATCH, f"record types {self.zonk(a)} and {self.zonk(b)} differ"
                )
            for label, ta in a.fields:
                self.unify(ta, b.field(label))
            return
        if isinstance(a, SetTy) and isinstance(b, SetTy):
            self.unify(a.elem, b.elem)
            return
        if isinstance(a, Option) and isinstance(b, Option):
            self.unify(a.inner, b.inner)
            return
        raise TypingError(TypeErrorKind.MISMATCH, f"cannot match {self.zonk(a)} with {self.zonk(b)}")

    def _set_elem(self, t: Ty, what: str) -> Ty:
        t = self.resolve(t)
        if isinstance(t, SetTy):
            return t.elem
        if isinstance(t, TVar):
            elem = self.fresh()
            self.unify(t, SetTy(elem))
            return elem
        raise TypingError(TypeErrorKind.MISMATCH, f"{what} must be a set, got {self.zonk(t)}")

    def _require_mode(self, wanted: Mode, what: str) -> None:
        if self.mode is not wanted:
            raise TypingError(TypeErrorKind.MODE_VIOLATION, f"{what} is not available in mode {self.mode}")

    # -- rules -----------------------------------------------------------

    def infer(self, env: dict[str, Ty], m: Term, path: tuple[int, ...] = ()) -> Ty:
        match m:
            case Var(x):
                if x not in env:
                    raise TypingError(TypeErrorKind.UNBOUND_VAR, f"unbound variable {x}")
                return env[x]
            case Const(_, b):
                return Base(b)
            case Prim(op, args):
                return self._prim(env, op, args, path)
            case RecordCons(fields):
                labels = [l for l, _ in fields]
                if len(set(labels)) != len(labels):
                    raise TypingError(TypeErrorKind.MISMATCH, f"duplicate labels {labels}")
                return Record(tuple((l, self.infer(env, t, path + (i,))) for i, (l, t) in enumerate(fields)))
            case Project(t, label):
                return self.project(self.infer(env, t, path + (0,)), label)
            case EmptySet():
                return SetTy(self.fresh())
            case Singleton(t):
                return SetTy(self.infer(env, t, path + (0,)))
            case Union(a, b):
                ta = self.infer(env, a, path + (0,))
                tb = self.infer(env, b, path + (1,))
                elem = self._set_elem(ta, "union operand")
                self.unify(SetTy(elem), tb)
                return SetTy(elem)
            case Comp(head, x, source):
                elem = self._set_elem(self.infer(env, source, path + (1,)), "comprehension source")
                th = self.infer({**env, x: elem}, head, path + (0,))
                return SetTy(self._set_elem(th, "comprehension body"))
            case Where(body, cond):
                tb = self.infer(env, body, path + (0,))
                self.unify(self.infer(env, cond, path + (1,)), BOOL)
                return SetTy(self._set_elem(tb, "where body"))
            case IsEmpty(t):
                self._set_elem(self.infer(env, t, path + (0,)), "empty() argument")
                return BOOL
            case If(c, a, b):
                self.unify(self.infer(env, c, path + (0,)), BOOL)
                ta = self.infer(env, a, path + (1,))
                tb = self.infer(env, b, path + (2,))
                self.unify(ta, tb)
                return ta
            case NoneLit():
                self._require_mode(Mode.NRC_OPT, "none")
                t = Option(self.fresh())
                self.none_types[path] = t
                return t
            case SomeLit(t):
                self._require_mode(Mode.NRC_OPT, "some")
                return Option(self.infer(env, t, path + (0,)))
            case Case(s, n, x, sm):
                self._require_mode(Mode.NRC_OPT, "case")
                ts = self.resolve(self.infer(env, s, path + (0,)))
                inner = self.fresh()
                try:
                    self.unify(ts, Option(inner))
                except TypingError:
                    raise TypingError(TypeErrorKind.MISMATCH, f"case scrutinee must be an option, got {self.zonk(ts)}") from None
                t1 = self.infer(env, n, path + (1,))
                t2 = self.infer({**env, x: inner}, sm, path + (2,))
                self.unify(t1, t2)
                return t1
            case NullLit():
                self._require_mode(Mode.NRC_NULL, "null")
                return self.fresh(BASE, from_null=True)
            case IsNull(t):
                self._require_mode(Mode.NRC_NULL, "isnull")
                self.unify(self.infer(env, t, path + (0,)), self.fresh(BASE))
                return BOOL
            case TableRef(name):
                return SetTy(table_row_type(self.mode, self.schema, name))
        raise TypingError(TypeErrorKind.MISMATCH, f"unknown term {m!r}")

    def _prim(self, env, op, args, path) -> Ty:
        if op not in ALL_OPS:
            raise TypingError(TypeErrorKind.MISMATCH, f"unknown primitive {op}")
        if len(args) != prim_arity(op):
            raise TypingError(
                TypeErrorKind.ARITY_MISMATCH, f"{op} expects {prim_arity(op)} arguments, got {len(args)}"
            )
        tys = [self.infer(env, a, path + (i,)) for i, a in enumerate(args)]
        if op in LOGIC_OPS:
            for t in tys:
                self.unify(t, BOOL)
            return BOOL
        operand = self.fresh(NUM if op in ARITH_OPS else BASE)
        for t in tys:
            self.unify(t, operand)
        return operand if op in ARITH_OPS else BOOL

    def has_unresolved(self, t: Ty) -> TVar | None:
        t = self.resolve(t)
        match t:
            case TVar():
                return t
            case Record(fields):
                for _, ft in fields:
                    v = self.has_unresolved(ft)
                    if v is not None:
                        return v
            case SetTy(elem):
                return self.has_unresolved(elem)
            case Option(inner):
                return self.has_unresolved(inner)
        return None


def typecheck(
    mode: Mode,
    schema: Schema | None,
    env: dict[str, Ty] | None,
    m: Term,
    expected: Ty | None = None,
) -> Ty:
    """The type of ``m`` in ``mode``; raises ``TypingError``."""
    ty, _ = elaborate(mode, schema, env, m, expected)
    return ty


_MODE_ONLY = {NoneLit: Mode.NRC_OPT, SomeLit: Mode.NRC_OPT, Case: Mode.NRC_OPT, NullLit: Mode.NRC_NULL, IsNull: Mode.NRC_NULL}
_CONSTRUCT_NAMES = {NoneLit: "none", SomeLit: "some", Case: "case", NullLit: "null", IsNull: "isnull"}


def check_mode(mode: Mode, m: Term) -> None:
    """Reject constructs outside the grammar of ``mode`` before any typing."""
    for s in subterms(m):
        wanted = _MODE_ONLY.get(type(s))
        if wanted is not None and wanted is not mode:
            raise TypingError(
                TypeErrorKind.MODE_VIOLATION, f"{_CONSTRUCT_NAMES[type(s)]} is not available in mode {mode}"
            )


def elaborate(mode, schema, env, m, expected=None) -> tuple[Ty, dict[tuple[int, ...], Ty]]:
    """Type ``m`` and also report the type of every ``none`` by tree path."""
    check_mode(mode, m)
    checker = Checker(mode, schema)
    ty = checker.infer(dict(env or {}), m)
    if expected is not None:
        checker.unify(ty, expected)
    bad = checker.has_unresolved(ty)
    if bad is not None:
        if bad.id in checker.from_null:
            raise TypingError(TypeErrorKind.NULL_AT_NON_BASE, "null has no determinable base type")
        raise TypingError(TypeErrorKind.MISMATCH, f"ambiguous type {checker.zonk(ty)}")
    checker.close_records()
    nones = {p: checker.zonk(t, INT) for p, t in checker.none_types.items()}
    return checker.zonk(ty), nones


def infer_partial(mode: Mode, schema: Schema | None, env: dict[str, Ty], m: Term) -> Ty:
    """Best-effort type for a subterm; unresolved parts stay as ``TVar``."""
    checker = Checker(mode, schema)
    local: dict[int, TVar] = {}

    def adopt(t: Ty) -> Ty:
        # type variables left over from other sessions get local names
        match t:
            case TVar(i):
                if i not in local:
                    local[i] = checker.fresh()
                return local[i]
            case Record(fields):
                return Record(tuple((l, adopt(ft)) for l, ft in fields))
            case SetTy(elem):
                return SetTy(adopt(elem))
            case Option(inner):
                return Option(adopt(inner))
        return t

    return checker.zonk(checker.infer({x: adopt(t) for x, t in env.items()}, m))


def check_subject_reduction(mode: Mode, schema: Schema | None, m: Term, m2: Term, env=None) -> bool:
    try:
        ty = typecheck(mode, schema, env, m)
        return typecheck(mode, schema, env, m2, expected=ty) == ty
    except TypingError:
        return False
