"""Translations between the calculi.

``null_to_opt`` makes implicit nulls explicit: every base value becomes an
option, primitives are lifted to options and conditions go through
``isTrue``.  ``opt_to_nrc`` then removes options by pairing each value with
an ``isnull`` flag and a default payload.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    BOOL,
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
    Value,
    Var,
    VConst,
    VNone,
    VNull,
    VRecord,
    VSet,
    VSome,
    Where,
    children,
    subst,
    subterms,
    with_children,
)
from .data import Schema
from .evaluator import default_value
from .typecheck import LOGIC_OPS, SIGNATURES, PrimSig, Strictness, TypingError, elaborate, typecheck


class TranslationError(ValueError):
    pass


# --------------------------------------------------------------------------
# Types
# --------------------------------------------------------------------------


def null_to_opt_ty(t: Ty) -> Ty:
    match t:
        case Base():
            return Option(t)
        case Record(fields):
            return Record(tuple((l, null_to_opt_ty(ft)) for l, ft in fields))
        case SetTy(elem):
            return SetTy(null_to_opt_ty(elem))
    raise TranslationError(f"not a type with implicit nulls: {t}")


def opt_to_nrc_ty(t: Ty) -> Ty:
    match t:
        case Base():
            return t
        case Record(fields):
            return Record(tuple((l, opt_to_nrc_ty(ft)) for l, ft in fields))
        case SetTy(elem):
            return SetTy(opt_to_nrc_ty(elem))
        case Option(inner):
            return Record((("isnull", BOOL), ("val", opt_to_nrc_ty(inner))))
    raise TranslationError(f"unknown type {t}")


# --------------------------------------------------------------------------
# Lifted primitives
# --------------------------------------------------------------------------


def hole(i: int) -> Var:
    """Argument placeholder; ``%`` keeps it apart from any user variable."""
    return Var(f"%{i}")


@dataclass(frozen=True)
class LiftedPrim:
    base: str
    template: Term
    arity: int

    def instantiate(self, args) -> Term:
        if len(args) != self.arity:
            raise TranslationError(f"{self.base}* expects {self.arity} arguments")
        out = self.template
        for i, a in enumerate(args):
            out = subst(out, hole(i).name, a)
        return out


def _k3_template(op: str) -> Term:
    x, y = hole(0), hole(1)
    if op == "!":
        return Case(x, NoneLit(), "a", SomeLit(Prim("!", (Var("a"),))))
    # a known absorbing operand decides the result on its own

    def absorbs(v: Term, otherwise: Term) -> Term:
        return If(v, otherwise, SomeLit(FALSE)) if op == "&&" else If(v, SomeLit(TRUE), otherwise)

    return Case(
        x,
        Case(y, NoneLit(), "b", absorbs(Var("b"), NoneLit())),
        "a",
        absorbs(Var("a"), y),
    )


def lift_prim(sig: PrimSig | str) -> LiftedPrim:
    op = sig if isinstance(sig, str) else sig.name
    if op in LOGIC_OPS:
        return LiftedPrim(op, _k3_template(op), 1 if op == "!" else 2)
    arity = 2
    body: Term = SomeLit(Prim(op, tuple(Var(f"a{i}") for i in range(arity))))
    for i in reversed(range(arity)):
        body = Case(hole(i), NoneLit(), f"a{i}", body)
    return LiftedPrim(op, body, arity)


_LIFTED = {s.name: lift_prim(s) for s in SIGNATURES if s.strictness is not Strictness.NULL_TEST}


def is_true(t: Term) -> Term:
    return Case(t, FALSE, "y", Var("y"))


# --------------------------------------------------------------------------
# NRC_null to NRC_opt
# --------------------------------------------------------------------------


def _wrap_table(schema: Schema, name: str) -> Term:
    row = Var("r")
    fields = []
    for col in schema.columns(name):
        cell = Project(row, col.name)
        fields.append((col.name, cell if col.nullable else SomeLit(cell)))
    return Comp(Singleton(RecordCons(tuple(fields))), "r", TableRef(name))


def null_to_opt(m: Term, schema: Schema | None = None) -> Term:
    """Translate an NRC_null term into NRC_opt."""
    schema = schema if schema is not None else Schema({})

    def go(m: Term) -> Term:
        match m:
            case Const():
                return SomeLit(m)
            case NullLit():
                return NoneLit()
            case IsNull(t):
                return Case(go(t), SomeLit(TRUE), "y", SomeLit(FALSE))
            case Prim(op, args):
                return _LIFTED[op].instantiate([go(a) for a in args])
            case If(c, a, b):
                return If(is_true(go(c)), go(a), go(b))
            case Where(body, cond):
                return Where(go(body), is_true(go(cond)))
            case IsEmpty(t):
                return SomeLit(IsEmpty(go(t)))
            case TableRef(name):
                if name not in schema:
                    raise TranslationError(f"unknown table {name}")
                return _wrap_table(schema, name)
            case NoneLit() | SomeLit() | Case():
                raise TranslationError("option constructs are not part of NRC_null")
        return with_children(m, [go(k) for k in children(m)])

    return go(m)


# --------------------------------------------------------------------------
# NRC_opt to NRC
# --------------------------------------------------------------------------


def default_term(t: Ty) -> Term:
    """The NRC image of the default value at the NRC_opt type ``t``.

    The default of an option type is ``none``, so nested options default to
    ``{isnull = true, val = ...}`` all the way down.
    """
    match t:
        case Base(b):
            v = default_value(t)
            return Const(v.value, b)
        case Record(fields):
            return RecordCons(tuple((l, default_term(ft)) for l, ft in fields))
        case SetTy():
            return EmptySet()
        case Option(inner):
            return RecordCons((("isnull", TRUE), ("val", default_term(inner))))
    raise TranslationError(f"no default term for {t}")


def opt_to_nrc(
    m: Term, schema: Schema | None = None, env: dict[str, Ty] | None = None, expected: Ty | None = None
) -> Term:
    """Translate a well-typed NRC_opt term into plain NRC.

    ``expected`` fixes the type of ``none`` literals that the term alone
    leaves open, exactly as when typechecking against it.
    """
    try:
        _, nones = elaborate(Mode.NRC_OPT, schema, env, m, expected)
    except TypingError as e:
        raise TranslationError(f"not a well-typed NRC_opt term: {e}") from e

    def go(m: Term, path: tuple[int, ...]) -> Term:
        match m:
            case NoneLit():
                return default_term(nones[path])
            case SomeLit(t):
                return RecordCons((("isnull", FALSE), ("val", go(t, path + (0,)))))
            case Case(s, n, x, sm):
                scrut = go(s, path + (0,))
                body = subst(go(sm, path + (2,)), x, Project(scrut, "val"))
                return If(Project(scrut, "isnull"), go(n, path + (1,)), body)
            case NullLit() | IsNull():
                raise TranslationError("null constructs are not part of NRC_opt")
        return with_children(m, [go(k, path + (i,)) for i, k in enumerate(children(m))])

    return go(m, ())


# --------------------------------------------------------------------------
# Value encodings used to state correctness
# --------------------------------------------------------------------------


def encode_value(v: Value) -> Value:
    """Image of an NRC_null value under the null-to-option translation."""
    match v:
        case VConst():
            return VSome(v)
        case VRecord(fields):
            return VRecord(tuple((l, encode_value(fv)) for l, fv in fields))
        case VSet(elems):
            return VSet(tuple(encode_value(e) for e in elems))
    if v is VNull:
        return VNone
    raise TranslationError(f"cannot encode {v!r}")


def flatten_value(v: Value, t: Ty) -> Value:
    """Image of an NRC_opt value of type ``t`` under the option-to-record translation."""
    match t:
        case Base():
            return v
        case Option(inner):
            if v is VNone:
                return VRecord((("isnull", VConst(True, BaseTy.BOOL)), ("val", flatten_value(default_value(inner), inner))))
            assert isinstance(v, VSome), v
            return VRecord((("isnull", VConst(False, BaseTy.BOOL)), ("val", flatten_value(v.value, inner))))
        case Record(fields):
            assert isinstance(v, VRecord), v
            return VRecord(tuple((l, flatten_value(v.get(l), ft)) for l, ft in fields))
        case SetTy(elem):
            assert isinstance(v, VSet), v
            return VSet(tuple(flatten_value(e, elem) for e in v))
    raise TranslationError(f"cannot flatten at type {t}")


_OPT_NODES = (NoneLit, SomeLit, Case)
_NULL_NODES = (NullLit, IsNull)


def is_option_free(m: Term) -> bool:
    return not any(isinstance(s, _OPT_NODES) for s in subterms(m))


def is_null_free(m: Term) -> bool:
    return not any(isinstance(s, _NULL_NODES) for s in subterms(m))


def translate(m: Term, source: Mode, target: Mode, schema: Schema | None = None, expected: Ty | None = None) -> Term:
    """Dispatch for the CLI: null->opt, opt->nrc, or their composite null->nrc."""
    if source is target:
        raise TranslationError("source and target modes must differ")
    if (source, target) == (Mode.NRC_NULL, Mode.NRC_OPT):
        return null_to_opt(m, schema)
    if (source, target) == (Mode.NRC_OPT, Mode.NRC):
        return opt_to_nrc(m, schema, expected=expected)
    if (source, target) == (Mode.NRC_NULL, Mode.NRC):
        ty = typecheck(Mode.NRC_NULL, schema, {}, m, expected=expected)
        return opt_to_nrc(null_to_opt(m, schema), schema, expected=null_to_opt_ty(ty))
    raise TranslationError(f"no translation from {source} to {target}")
