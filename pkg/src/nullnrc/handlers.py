"""Null handlers: per-field instructions for possibly-null query results.

A handler such as ``<id: required, name: required, type: default -1>``
says, for each field, whether to return it as an option, to skip rows
where it is null, or to replace a null with a fixed value.  It can be
applied on the database side, by wrapping the query in a comprehension
that uses ``isnull``, or on the host side by decoding the result rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    Base,
    Comp,
    Const,
    If,
    IsEmpty,
    IsNull,
    NullLit,
    Prim,
    Project,
    Record,
    RecordCons,
    SetTy,
    Singleton,
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
    EmptySet,
    fresh_name,
    free_vars,
)
from .data import Schema
from .surface import ParseError, Parser


@dataclass(frozen=True)
class Optional:
    def __str__(self):
        return "optional"


@dataclass(frozen=True)
class Required:
    def __str__(self):
        return "required"


@dataclass(frozen=True)
class Default:
    value: Const

    def __str__(self):
        from .surface import format_literal

        return f"default {format_literal(self.value.value, self.value.ty)}"


FieldPolicy = Optional | Required | Default


@dataclass(frozen=True)
class NullHandler:
    """Policies by label; ``labels`` is the full result row in order.

    Labels without a policy are passed through untouched.
    """

    labels: tuple[str, ...]
    policies: dict[str, FieldPolicy] = field(default_factory=dict)

    def policy(self, label: str) -> FieldPolicy | None:
        return self.policies.get(label)

    def __str__(self):
        return "<" + ", ".join(f"{l}: {p}" for l, p in self.policies.items()) + ">"

    def __hash__(self):
        return hash((self.labels, tuple(sorted(self.policies.items(), key=lambda kv: kv[0]))))


def _row_type(result_ty: Ty) -> Record:
    if not (isinstance(result_ty, SetTy) and isinstance(result_ty.elem, Record)):
        raise ValueError(f"handlers apply to sets of records, not {result_ty}")
    row = result_ty.elem
    for l, t in row.fields:
        if not isinstance(t, Base):
            raise ValueError(f"field {l} has non-base type {t}")
    return row


def make_handler(result_ty: Ty, policies: dict[str, FieldPolicy], nullable=None) -> NullHandler:
    """Build a handler, filling unmentioned nullable fields with ``Optional``.

    ``nullable`` is the set of labels that may be null; by default every
    label is assumed to be.
    """
    row = _row_type(result_ty)
    labels = row.labels
    for l, p in policies.items():
        ft = row.field(l)
        if ft is None:
            raise ValueError(f"unknown label {l}")
        if isinstance(p, Default) and p.value.ty is not ft.b:
            raise ValueError(f"default for {l} must have type {ft}, got {p.value.ty}")
    nullable = set(labels) if nullable is None else set(nullable)
    full = {}
    for l in labels:
        if l in policies:
            full[l] = policies[l]
        elif l in nullable:
            full[l] = Optional()
    return NullHandler(labels, full)


def parse_handler(src: str, result_ty: Ty, nullable=None, file: str | None = None) -> NullHandler:
    """Parse ``<label: optional | required | default LIT, ...>``."""
    row = _row_type(result_ty)
    p = Parser(src, file)
    p.expect("<")
    policies: dict[str, FieldPolicy] = {}
    while not p.at(">"):
        tok = p.tok
        label = p.label()
        if row.field(label) is None:
            raise ParseError(tok.span, f"unknown label {label}", "a result field label")
        if label in policies:
            raise ParseError(tok.span, f"label {label} mentioned twice", "a new label")
        p.expect(":")
        word = p.tok
        if word.kind == "IDENT" and word.text in ("optional", "required", "default"):
            p.advance()
        else:
            raise p.error("optional, required or default")
        if word.text == "optional":
            policies[label] = Optional()
        elif word.text == "required":
            policies[label] = Required()
        else:
            lit_tok = p.tok
            lit = p.literal()
            want = row.field(label).b
            if lit.ty is not want:
                raise ParseError(lit_tok.span, f"default for {label} must have type {want}", str(want))
            policies[label] = Default(lit)
        if not p.at(">"):
            p.expect(",")
    p.expect(">")
    p.finish()
    return make_handler(result_ty, policies, nullable)


# --------------------------------------------------------------------------
# Database side
# --------------------------------------------------------------------------


def desugar_db_side(h: NullHandler, q: Term) -> Term:
    """Wrap ``q`` so that defaults and required fields are handled by the query."""
    fv = free_vars(q)
    x = fresh_name("h", fv) if "h" in fv else "h"
    row = Var(x)
    fields = []
    required = []
    for l in h.labels:
        cell = Project(row, l)
        p = h.policy(l)
        if isinstance(p, Default):
            cell = If(IsNull(cell), p.value, cell)
        elif isinstance(p, Required):
            required.append(Prim("!", (IsNull(Project(row, l)),)))
        fields.append((l, cell))
    body: Term = Singleton(RecordCons(tuple(fields)))
    if required:
        cond = required[0]
        for c in required[1:]:
            cond = Prim("&&", (cond, c))
        body = Where(body, cond)
    return Comp(body, x, q)


def residual(h: NullHandler) -> NullHandler:
    """What is left for the host once ``desugar_db_side`` has run."""
    rest = {l: (Optional() if isinstance(p, Optional) else Required()) for l, p in h.policies.items()}
    return NullHandler(h.labels, rest)


# --------------------------------------------------------------------------
# Host side
# --------------------------------------------------------------------------


def decode_row(h: NullHandler, row: VRecord) -> VRecord | None:
    out = []
    for l, v in row.fields:
        p = h.policy(l)
        if isinstance(p, Required) and v is VNull:
            return None
        if isinstance(p, Default) and v is VNull:
            v = VConst(p.value.value, p.value.ty)
        elif isinstance(p, Optional):
            v = VNone if v is VNull else VSome(v)
        out.append((l, v))
    return VRecord(tuple(out))


def decode_host_side(h: NullHandler, rows: Value, result_ty: Ty | None = None) -> VSet:
    if result_ty is not None:
        _row_type(result_ty)
    if not isinstance(rows, VSet):
        raise ValueError(f"expected a set of rows, got {rows!r}")
    out = []
    for r in rows:
        if not isinstance(r, VRecord):
            raise ValueError(f"expected a record row, got {r!r}")
        d = decode_row(h, r)
        if d is not None:
            out.append(d)
    return VSet(tuple(out))


# --------------------------------------------------------------------------
# Which result fields can be null
# --------------------------------------------------------------------------


def nullable_labels(q: Term, schema: Schema) -> set[str] | None:
    """Labels that may be null in a normal-form query, or None if unknown.

    A small syntactic approximation over unions of comprehensions: a field
    is non-null when every branch builds it from non-nullable columns,
    constants and null-free operations.
    """
    out: set[str] = set()

    def scalar(m: Term, scope) -> bool | None:
        match m:
            case Const():
                return False
            case NullLit():
                return True
            case Project(Var(x), label) if x in scope:
                col = schema.column(scope[x], label)
                return None if col is None else col.nullable
            case Prim(_, args):
                parts = [scalar(a, scope) for a in args]
                return None if None in parts else any(parts)
            case IsNull() | IsEmpty():
                return False
            case If(_, a, b):
                parts = [scalar(a, scope), scalar(b, scope)]
                return None if None in parts else any(parts)
        return None

    def branch(m: Term, scope) -> bool:
        match m:
            case EmptySet():
                return True
            case Union(a, b):
                return branch(a, scope) and branch(b, scope)
            case Comp(body, x, TableRef(t)) if t in schema:
                return branch(body, {**scope, x: t})
            case Where(body, _):
                return branch(body, scope)
            case Singleton(RecordCons(fields)):
                for l, e in fields:
                    n = scalar(e, scope)
                    if n is None:
                        return False
                    if n:
                        out.add(l)
                return True
            case Singleton(Var(x)) if x in scope:
                out.update(c.name for c in schema.columns(scope[x]) if c.nullable)
                return True
            case TableRef(t) if t in schema:
                out.update(c.name for c in schema.columns(t) if c.nullable)
                return True
        return False

    return out if branch(q, {}) else None
