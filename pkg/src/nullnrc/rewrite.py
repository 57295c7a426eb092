"""Query normalization by rewriting to a fixpoint.

``step`` contracts the leftmost-outermost redex, trying rules in the fixed
order of ``RuleId``; ``normalize`` iterates it under a fuel budget.  Rules
are gated by mode: the common set everywhere, if-splitting on a plain
boolean in NRC and NRC_opt, case reduction in NRC_opt, and the null rules
(including the null-aware if-splitting) in NRC_null.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from .ast import (
    FALSE,
    TRUE,
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
    VConst,
    Var,
    VNull,
    Where,
    binder_of,
    children,
    free_vars,
    fresh_name,
    mentions_table,
    rename,
    subst,
    term_eq_alpha,
    with_children,
)
from .data import Schema
from .evaluator import EvalError, apply_prim
from .typecheck import LOGIC_OPS, TypingError, TVar, infer_partial


class RuleId(enum.Enum):
    PROJ_BETA = "ProjBeta"
    PRIM_DELTA = "PrimDelta"
    COMP_EMPTY_HEAD = "CompEmptyHead"
    COMP_EMPTY_SOURCE = "CompEmptySource"
    COMP_SINGLETON = "CompSingleton"
    COMP_UNION_HEAD = "CompUnionHead"
    COMP_UNION_SOURCE = "CompUnionSource"
    COMP_NESTED = "CompNested"
    COMP_WHERE_SOURCE = "CompWhereSource"
    WHERE_TRUE = "WhereTrue"
    WHERE_FALSE = "WhereFalse"
    WHERE_EMPTY = "WhereEmpty"
    WHERE_UNION = "WhereUnion"
    WHERE_COMP = "WhereComp"
    WHERE_WHERE = "WhereWhere"
    EMPTY_WRAP = "EmptyWrap"
    IF_RECORD = "IfRecord"
    IF_WHERE = "IfWhere"
    IF_SET_NRC = "IfSetNRC"
    CASE_NONE = "CaseNone"
    CASE_SOME = "CaseSome"
    WHERE_NULL = "WhereNull"
    IF_SET_NULL = "IfSetNull"
    IS_NULL_NULL = "IsNullNull"
    IS_NULL_CONST = "IsNullConst"
    PRIM_NULL_STRICT = "PrimNullStrict"

    def __str__(self):
        return self.value


_ALL = frozenset(Mode)
RULE_MODES: dict[RuleId, frozenset[Mode]] = {r: _ALL for r in RuleId}
RULE_MODES[RuleId.IF_SET_NRC] = frozenset({Mode.NRC, Mode.NRC_OPT})
for _r in (RuleId.CASE_NONE, RuleId.CASE_SOME):
    RULE_MODES[_r] = frozenset({Mode.NRC_OPT})
for _r in (RuleId.WHERE_NULL, RuleId.IF_SET_NULL, RuleId.IS_NULL_NULL, RuleId.IS_NULL_CONST, RuleId.PRIM_NULL_STRICT):
    RULE_MODES[_r] = frozenset({Mode.NRC_NULL})


Path = tuple[int, ...]


@dataclass(frozen=True)
class TraceStep:
    rule: RuleId
    path: Path
    before: Term
    after: Term

    def __str__(self):
        from .surface import pretty

        where = ".".join(map(str, self.path)) or "root"
        return f"{self.rule} @ {where} : {pretty(self.before)} ==> {pretty(self.after)}"


class FuelExhausted(Exception):
    def __init__(self, term: Term, trace: list[TraceStep]):
        super().__init__(f"normalization did not finish within {len(trace)} steps")
        self.term = term
        self.trace = trace


def format_trace(trace: list[TraceStep]) -> str:
    return "".join(f"{s}\n" for s in trace)


def subterm_at(m: Term, path: Path) -> Term:
    for i in path:
        m = children(m)[i]
    return m


def replace_at(m: Term, path: Path, new: Term) -> Term:
    if not path:
        return new
    kids = list(children(m))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(m, kids)


def replay(m: Term, trace: list[TraceStep]) -> Term:
    """Re-apply a trace to its input; each recorded redex must match."""
    for s in trace:
        found = subterm_at(m, s.path)
        if not term_eq_alpha(found, s.before):
            raise ValueError(f"trace step {s.rule} does not match the term at {s.path}")
        m = replace_at(m, s.path, s.after)
    return m


# --------------------------------------------------------------------------
# Typing context for guards
# --------------------------------------------------------------------------


class _Ctx:
    """Lazily typed binder environment for the subterm being inspected."""

    __slots__ = ("rw", "parent", "var", "thunk", "_ty", "_env")

    def __init__(self, rw, parent=None, var=None, thunk=None):
        self.rw = rw
        self.parent = parent
        self.var = var
        self.thunk = thunk
        self._ty = None
        self._env = None

    def env(self) -> dict[str, Ty]:
        if self._env is None:
            if self.parent is None:
                self._env = dict(self.rw.env)
            else:
                env = dict(self.parent.env())
                if self._ty is None:
                    self._ty = self.thunk(self.parent)
                env[self.var] = self._ty
                self._env = env
        return self._env

    def type_of(self, m: Term) -> Ty | None:
        try:
            return infer_partial(self.rw.mode, self.rw.schema, self.env(), m)
        except TypingError:
            return None

    def enter(self, m: Term, index: int) -> _Ctx:
        var = binder_of(m, index)
        if var is None:
            return self
        if isinstance(m, Comp):
            source = m.source

            def thunk(ctx, source=source):
                t = ctx.type_of(source)
                return t.elem if isinstance(t, SetTy) else TVar(-1)

        else:
            scrut = m.scrut

            def thunk(ctx, scrut=scrut):
                from .ast import Option

                t = ctx.type_of(scrut)
                return t.inner if isinstance(t, Option) else TVar(-1)

        return _Ctx(self.rw, self, var, thunk)


_SET_FORMS = (EmptySet, Singleton, Union, Comp, Where, TableRef)


def _is_set_typed(ctx: _Ctx, m: If) -> bool:
    if isinstance(m.then, _SET_FORMS) or isinstance(m.else_, _SET_FORMS):
        return True
    return isinstance(ctx.type_of(m), SetTy)


def _record_type(ctx: _Ctx, m: If) -> tuple[str, ...] | None:
    for branch in (m.then, m.else_):
        if isinstance(branch, RecordCons):
            return tuple(l for l, _ in branch.fields)
        if isinstance(branch, _SET_FORMS) or isinstance(branch, (Const, Prim)):
            return None
    t = ctx.type_of(m)
    if isinstance(t, Record):
        return t.labels
    return None


def _is_relation_type(t: Ty | None) -> bool:
    if t is None or not isinstance(t, SetTy):
        return True
    elem = t.elem
    if isinstance(elem, TVar):
        return True
    return isinstance(elem, Record) and all(isinstance(ft, (Base, TVar)) for _, ft in elem.fields)


# --------------------------------------------------------------------------
# Rules
# --------------------------------------------------------------------------


def _is_k3_value(m: Term) -> bool:
    return (isinstance(m, Const) and m.ty is BaseTy.BOOL) or isinstance(m, NullLit)


def _term_of_value(v) -> Term:
    if v is VNull:
        return NullLit()
    assert isinstance(v, VConst)
    return Const(v.value, v.ty)


def _value_of_const(m: Term):
    return VNull if isinstance(m, NullLit) else VConst(m.value, m.ty)


def _prim_delta(ctx, m: Prim):
    if m.op in LOGIC_OPS:
        if all(_is_k3_value(a) for a in m.args):
            return _term_of_value(apply_prim(m.op, [_value_of_const(a) for a in m.args]))
        if m.op in ("&&", "||"):
            absorbing = FALSE if m.op == "&&" else TRUE
            a, b = m.args
            if a == absorbing and not mentions_table(b):
                return absorbing
            if b == absorbing and not mentions_table(a):
                return absorbing
        return None
    if all(isinstance(a, Const) for a in m.args):
        try:
            return _term_of_value(apply_prim(m.op, [_value_of_const(a) for a in m.args]))
        except EvalError:
            return None
    return None


def _prim_null_strict(ctx, m: Prim):
    if m.op not in LOGIC_OPS and any(isinstance(a, NullLit) for a in m.args):
        return NullLit()
    return None


def _proj_beta(ctx, m: Project):
    if isinstance(m.term, RecordCons):
        for label, t in m.term.fields:
            if label == m.label:
                return t
    return None


def _comp_empty_head(ctx, m: Comp):
    return EmptySet() if isinstance(m.head, EmptySet) else None


def _comp_empty_source(ctx, m: Comp):
    return EmptySet() if isinstance(m.source, EmptySet) else None


def _comp_singleton(ctx, m: Comp):
    if isinstance(m.source, Singleton):
        return subst(m.head, m.var, m.source.term)
    return None


def _comp_union_head(ctx, m: Comp):
    if isinstance(m.head, Union):
        return Union(Comp(m.head.left, m.var, m.source), Comp(m.head.right, m.var, m.source))
    return None


def _comp_union_source(ctx, m: Comp):
    if isinstance(m.source, Union):
        return Union(Comp(m.head, m.var, m.source.left), Comp(m.head, m.var, m.source.right))
    return None


def _comp_nested(ctx, m: Comp):
    inner = m.source
    if not isinstance(inner, Comp):
        return None
    x, r = inner.var, inner.head
    if x in free_vars(m.head):
        new = fresh_name(x, free_vars(m.head) | free_vars(r))
        r, x = rename(r, x, new), new
    return Comp(Comp(m.head, m.var, r), x, inner.source)


def _comp_where_source(ctx, m: Comp):
    if isinstance(m.source, Where):
        return Where(Comp(m.head, m.var, m.source.body), m.source.cond)
    return None


def _where_true(ctx, m: Where):
    return m.body if m.cond == TRUE else None


def _where_false(ctx, m: Where):
    return EmptySet() if m.cond == FALSE else None


def _where_empty(ctx, m: Where):
    return EmptySet() if isinstance(m.body, EmptySet) else None


def _where_union(ctx, m: Where):
    if isinstance(m.body, Union):
        return Union(Where(m.body.left, m.cond), Where(m.body.right, m.cond))
    return None


def _where_comp(ctx, m: Where):
    body = m.body
    if not isinstance(body, Comp):
        return None
    x, head = body.var, body.head
    fv = free_vars(m.cond)
    if x in fv:
        new = fresh_name(x, fv | free_vars(head))
        head, x = rename(head, x, new), new
    return Comp(Where(head, m.cond), x, body.source)


def _where_where(ctx, m: Where):
    if isinstance(m.body, Where):
        return Where(m.body.body, Prim("&&", (m.body.cond, m.cond)))
    return None


def _empty_wrap(ctx, m: IsEmpty):
    if _is_relation_type(ctx.type_of(m.term)):
        return None
    x = fresh_name("e", free_vars(m.term))
    return IsEmpty(Comp(Singleton(RecordCons(())), x, m.term))


def _if_record(ctx, m: If):
    labels = _record_type(ctx, m)
    if labels is None:
        return None
    return RecordCons(tuple((l, If(m.cond, Project(m.then, l), Project(m.else_, l))) for l in labels))


def _if_where(ctx, m: If):
    return Where(m.then, m.cond) if isinstance(m.else_, EmptySet) else None


def _if_set_nrc(ctx, m: If):
    if isinstance(m.else_, EmptySet) or not _is_set_typed(ctx, m):
        return None
    return Union(Where(m.then, m.cond), Where(m.else_, Prim("!", (m.cond,))))


def _if_set_null(ctx, m: If):
    if isinstance(m.else_, EmptySet) or not _is_set_typed(ctx, m):
        return None
    guard = Prim("||", (IsNull(m.cond), Prim("!", (m.cond,))))
    return Union(Where(m.then, m.cond), Where(m.else_, guard))


def _case_none(ctx, m: Case):
    return m.none_branch if isinstance(m.scrut, NoneLit) else None


def _case_some(ctx, m: Case):
    if isinstance(m.scrut, SomeLit):
        return subst(m.some_branch, m.var, m.scrut.term)
    return None


def _where_null(ctx, m: Where):
    return EmptySet() if isinstance(m.cond, NullLit) else None


def _is_null_null(ctx, m: IsNull):
    return TRUE if isinstance(m.term, NullLit) else None


def _is_null_const(ctx, m: IsNull):
    return FALSE if isinstance(m.term, Const) else None


Rule = Callable[[_Ctx, Term], "Term | None"]

_RULES: list[tuple[RuleId, type, Rule]] = [
    (RuleId.PROJ_BETA, Project, _proj_beta),
    (RuleId.PRIM_DELTA, Prim, _prim_delta),
    (RuleId.COMP_EMPTY_HEAD, Comp, _comp_empty_head),
    (RuleId.COMP_EMPTY_SOURCE, Comp, _comp_empty_source),
    (RuleId.COMP_SINGLETON, Comp, _comp_singleton),
    (RuleId.COMP_UNION_HEAD, Comp, _comp_union_head),
    (RuleId.COMP_UNION_SOURCE, Comp, _comp_union_source),
    (RuleId.COMP_NESTED, Comp, _comp_nested),
    (RuleId.COMP_WHERE_SOURCE, Comp, _comp_where_source),
    (RuleId.WHERE_TRUE, Where, _where_true),
    (RuleId.WHERE_FALSE, Where, _where_false),
    (RuleId.WHERE_EMPTY, Where, _where_empty),
    (RuleId.WHERE_UNION, Where, _where_union),
    (RuleId.WHERE_COMP, Where, _where_comp),
    (RuleId.WHERE_WHERE, Where, _where_where),
    (RuleId.EMPTY_WRAP, IsEmpty, _empty_wrap),
    (RuleId.IF_RECORD, If, _if_record),
    (RuleId.IF_WHERE, If, _if_where),
    (RuleId.IF_SET_NRC, If, _if_set_nrc),
    (RuleId.CASE_NONE, Case, _case_none),
    (RuleId.CASE_SOME, Case, _case_some),
    (RuleId.WHERE_NULL, Where, _where_null),
    (RuleId.IF_SET_NULL, If, _if_set_null),
    (RuleId.IS_NULL_NULL, IsNull, _is_null_null),
    (RuleId.IS_NULL_CONST, IsNull, _is_null_const),
    (RuleId.PRIM_NULL_STRICT, Prim, _prim_null_strict),
]


class Rewriter:
    def __init__(self, mode: Mode, schema: Schema | None = None, env: dict[str, Ty] | None = None):
        self.mode = mode
        self.schema = schema if schema is not None else Schema({})
        self.env = dict(env or {})
        self._by_class: dict[type, list[tuple[RuleId, Rule]]] = {}
        for rid, cls, fn in _RULES:
            if mode in RULE_MODES[rid]:
                self._by_class.setdefault(cls, []).append((rid, fn))

    def step(self, m: Term) -> tuple[Term, RuleId, Path, Term, Term] | None:
        found = self._find(m, _Ctx(self), ())
        if found is None:
            return None
        rid, path, before, after = found
        return replace_at(m, path, after), rid, path, before, after

    def _find(self, m: Term, ctx: _Ctx, path: Path):
        for rid, fn in self._by_class.get(type(m), ()):
            out = fn(ctx, m)
            if out is not None:
                return rid, path, m, out
        for i, k in enumerate(children(m)):
            found = self._find(k, ctx.enter(m, i), path + (i,))
            if found is not None:
                return found
        return None

    def normalize(self, m: Term, fuel: int = 10_000) -> tuple[Term, list[TraceStep]]:
        trace: list[TraceStep] = []
        for _ in range(fuel):
            s = self.step(m)
            if s is None:
                return m, trace
            m, rid, path, before, after = s
            trace.append(TraceStep(rid, path, before, after))
        if self.step(m) is None:
            return m, trace
        raise FuelExhausted(m, trace)


def step(mode: Mode, m: Term, schema: Schema | None = None, env=None):
    """One rewrite: ``(term, rule, path)``, or ``None`` when ``m`` is normal."""
    s = Rewriter(mode, schema, env).step(m)
    if s is None:
        return None
    new, rid, path, _, _ = s
    return new, rid, path


def normalize(mode: Mode, m: Term, fuel: int = 10_000, schema: Schema | None = None, env=None):
    return Rewriter(mode, schema, env).normalize(m, fuel)


# --------------------------------------------------------------------------
# SQL-translatable normal forms
# --------------------------------------------------------------------------


class _NormalForm:
    def __init__(self, schema: Schema, mode: Mode):
        self.schema = schema
        self.mode = mode

    def query(self, m: Term, scope: dict[str, str]) -> bool:
        if isinstance(m, EmptySet):
            return True
        if isinstance(m, Union):
            return self.query(m.left, scope) and self.query(m.right, scope)
        return self.branch(m, scope)

    def branch(self, m: Term, scope) -> bool:
        match m:
            case Comp(body, x, TableRef(t)) if t in self.schema:
                return self.branch(body, {**scope, x: t})
            case Where(body, cond):
                return self.branch(body, scope) and self.scalar(cond, scope)
            case Singleton(row):
                return self.row(row, scope)
            case TableRef(t):
                return t in self.schema and self._flat_table(t)
        return False

    def _flat_table(self, t: str) -> bool:
        return self.mode is Mode.NRC_NULL or not any(c.nullable for c in self.schema.columns(t))

    def row(self, m: Term, scope) -> bool:
        if isinstance(m, RecordCons):
            return all(self.scalar(t, scope) for _, t in m.fields)
        if isinstance(m, Var):
            return m.name in scope and self._flat_table(scope[m.name])
        return False

    def scalar(self, m: Term, scope) -> bool:
        match m:
            case Const():
                return True
            case NullLit():
                return self.mode is Mode.NRC_NULL
            case Project(Var(x), label) if x in scope:
                col = self.schema.column(scope[x], label)
                return col is not None and (self.mode is Mode.NRC_NULL or not col.nullable)
            case Prim(_, args):
                return all(self.scalar(a, scope) for a in args)
            case IsNull(t):
                return self.mode is Mode.NRC_NULL and self.scalar(t, scope)
            case If(c, a, b):
                return self.scalar(c, scope) and self.scalar(a, scope) and self.scalar(b, scope)
            case IsEmpty(q):
                return self.query(q, scope)
        return False


def is_sql_normal_form(m: Term, schema: Schema, mode: Mode = Mode.NRC_NULL) -> bool:
    """True iff ``m`` is a union of flat comprehensions over tables."""
    try:
        ty = infer_partial(mode, schema, {}, m)
    except TypingError:
        return False
    if not isinstance(ty, SetTy):
        return False
    elem = ty.elem
    if not (isinstance(elem, TVar) or (isinstance(elem, Record) and all(isinstance(t, (Base, TVar)) for _, t in elem.fields))):
        return False
    if free_vars(m):
        return False
    return _NormalForm(schema, mode).query(m, {})
