"""Types, terms and values shared by every stage of the toolkit.

Everything here is immutable.  Terms and types are frozen dataclasses,
values carry a canonical sort key so that sets of values can be kept
deduplicated and deterministically ordered.
"""

from __future__ import annotations

import enum
import itertools
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator


class BaseTy(enum.Enum):
    INT = "int"
    BOOL = "bool"
    STRING = "string"
    FLOAT = "float"

    def __str__(self):
        return self.value


_BASE_RANK = {BaseTy.INT: 0, BaseTy.BOOL: 1, BaseTy.STRING: 2, BaseTy.FLOAT: 3}


class Mode(enum.Enum):
    NRC = "nrc"
    NRC_OPT = "opt"
    NRC_NULL = "null"

    def __str__(self):
        return self.value


# --------------------------------------------------------------------------
# Types
# --------------------------------------------------------------------------


class Ty:
    __slots__ = ()


@dataclass(frozen=True)
class Base(Ty):
    b: BaseTy

    def __str__(self):
        return self.b.value


@dataclass(frozen=True, eq=False)
class Record(Ty):
    """Record type.  Field order is kept for printing but ignored by ``==``."""

    fields: tuple[tuple[str, Ty], ...]

    def __post_init__(self):
        labels = [label for label, _ in self.fields]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate record labels in {labels}")

    def __eq__(self, other):
        return isinstance(other, Record) and dict(self.fields) == dict(other.fields)

    def __hash__(self):
        return hash(frozenset(self.fields))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.fields)

    def field(self, label: str) -> Ty | None:
        for name, ty in self.fields:
            if name == label:
                return ty
        return None

    def __str__(self):
        return "{" + ", ".join(f"{l}: {t}" for l, t in self.fields) + "}"


@dataclass(frozen=True)
class SetTy(Ty):
    elem: Ty

    def __str__(self):
        return f"[{self.elem}]"


@dataclass(frozen=True)
class Option(Ty):
    inner: Ty

    def __str__(self):
        inner = str(self.inner)
        return f"{inner}?"


INT = Base(BaseTy.INT)
BOOL = Base(BaseTy.BOOL)
STRING = Base(BaseTy.STRING)
FLOAT = Base(BaseTy.FLOAT)


def record_ty(**fields: Ty) -> Record:
    return Record(tuple(fields.items()))


def is_flat_relation(ty: Ty) -> bool:
    """True for ``Set(Record(...))`` whose fields are all base-typed."""
    return (
        isinstance(ty, SetTy)
        and isinstance(ty.elem, Record)
        and all(isinstance(t, Base) for _, t in ty.elem.fields)
    )


def contains_option(ty: Ty) -> bool:
    match ty:
        case Option():
            return True
        case Record(fields):
            return any(contains_option(t) for _, t in fields)
        case SetTy(elem):
            return contains_option(elem)
    return False


# --------------------------------------------------------------------------
# Terms
# --------------------------------------------------------------------------


def _lit_key(ty: BaseTy, value):
    if ty is BaseTy.FLOAT:
        return (value, struct.pack(">d", value))
    return value


def _base_of_literal(value) -> BaseTy:
    if isinstance(value, bool):
        return BaseTy.BOOL
    if isinstance(value, int):
        return BaseTy.INT
    if isinstance(value, float):
        return BaseTy.FLOAT
    if isinstance(value, str):
        return BaseTy.STRING
    raise TypeError(f"no base type for literal {value!r}")


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True, eq=False)
class Const(Term):
    value: object
    ty: BaseTy

    @classmethod
    def of(cls, value) -> Const:
        return cls(value, _base_of_literal(value))

    def __eq__(self, other):
        return (
            isinstance(other, Const)
            and self.ty is other.ty
            and _lit_key(self.ty, self.value) == _lit_key(other.ty, other.value)
        )

    def __hash__(self):
        return hash((self.ty, _lit_key(self.ty, self.value)))


@dataclass(frozen=True)
class Prim(Term):
    op: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class RecordCons(Term):
    fields: tuple[tuple[str, Term], ...]


@dataclass(frozen=True)
class Project(Term):
    term: Term
    label: str


@dataclass(frozen=True)
class EmptySet(Term):
    pass


@dataclass(frozen=True)
class Singleton(Term):
    term: Term


@dataclass(frozen=True)
class Union(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Comp(Term):
    """``for (var <- source) head``: union of ``head`` over the source."""

    head: Term
    var: str
    source: Term


@dataclass(frozen=True)
class Where(Term):
    body: Term
    cond: Term


@dataclass(frozen=True)
class IsEmpty(Term):
    term: Term


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    else_: Term


@dataclass(frozen=True)
class NoneLit(Term):
    pass


@dataclass(frozen=True)
class SomeLit(Term):
    term: Term


@dataclass(frozen=True)
class Case(Term):
    scrut: Term
    none_branch: Term
    var: str
    some_branch: Term


@dataclass(frozen=True)
class NullLit(Term):
    pass


@dataclass(frozen=True)
class IsNull(Term):
    term: Term


@dataclass(frozen=True)
class TableRef(Term):
    name: str


TRUE = Const(True, BaseTy.BOOL)
FALSE = Const(False, BaseTy.BOOL)


def children(m: Term) -> tuple[Term, ...]:
    match m:
        case Prim(_, args):
            return args
        case RecordCons(fields):
            return tuple(t for _, t in fields)
        case Project(t, _) | Singleton(t) | IsEmpty(t) | SomeLit(t) | IsNull(t):
            return (t,)
        case Union(a, b):
            return (a, b)
        case Comp(head, _, source):
            return (head, source)
        case Where(body, cond):
            return (body, cond)
        case If(c, a, b):
            return (c, a, b)
        case Case(s, n, _, sm):
            return (s, n, sm)
    return ()


def with_children(m: Term, kids) -> Term:
    kids = tuple(kids)
    match m:
        case Prim(op, _):
            return Prim(op, kids)
        case RecordCons(fields):
            return RecordCons(tuple((l, k) for (l, _), k in zip(fields, kids)))
        case Project(_, label):
            return Project(kids[0], label)
        case Singleton():
            return Singleton(kids[0])
        case IsEmpty():
            return IsEmpty(kids[0])
        case SomeLit():
            return SomeLit(kids[0])
        case IsNull():
            return IsNull(kids[0])
        case Union():
            return Union(*kids)
        case Comp(_, var, _):
            return Comp(kids[0], var, kids[1])
        case Where():
            return Where(*kids)
        case If():
            return If(*kids)
        case Case(_, _, var, _):
            return Case(kids[0], kids[1], var, kids[2])
    return m


def binder_of(m: Term, index: int) -> str | None:
    """The variable bound by ``m`` inside its ``index``-th child, if any."""
    if isinstance(m, Comp) and index == 0:
        return m.var
    if isinstance(m, Case) and index == 2:
        return m.var
    return None


def subterms(m: Term) -> Iterator[Term]:
    yield m
    for k in children(m):
        yield from subterms(k)


def term_depth(m: Term) -> int:
    kids = children(m)
    return 1 + (max(map(term_depth, kids)) if kids else 0)


def term_size(m: Term) -> int:
    return 1 + sum(map(term_size, children(m)))


def mentions_table(m: Term) -> bool:
    return any(isinstance(t, TableRef) for t in subterms(m))


# --------------------------------------------------------------------------
# Variables, substitution, alpha-equivalence
# --------------------------------------------------------------------------


def free_vars(m: Term) -> frozenset[str]:
    match m:
        case Var(x):
            return frozenset((x,))
        case Comp(head, x, source):
            return (free_vars(head) - {x}) | free_vars(source)
        case Case(s, n, x, sm):
            return free_vars(s) | free_vars(n) | (free_vars(sm) - {x})
    out = frozenset()
    for k in children(m):
        out |= free_vars(k)
    return out


_fresh_counter = itertools.count(1)


def fresh_name(stem: str, avoid: Iterable[str] = ()) -> str:
    """A new variable name ``stem_N`` not in ``avoid``."""
    avoid = set(avoid)
    stem = stem.rstrip("0123456789").rstrip("_") or "v"
    while True:
        name = f"{stem}_{next(_fresh_counter)}"
        if name not in avoid:
            return name


def rename(m: Term, old: str, new: str) -> Term:
    return subst(m, old, Var(new))


def subst(m: Term, x: str, n: Term) -> Term:
    """Capture-avoiding substitution ``m[n/x]``."""
    return _subst(m, x, n, free_vars(n))


def _subst(m: Term, x: str, n: Term, fv_n: frozenset[str]) -> Term:
    if isinstance(m, Var):
        return n if m.name == x else m
    if x not in free_vars(m):
        return m
    if isinstance(m, Comp):
        source = _subst(m.source, x, n, fv_n)
        var, head = _under_binder(m.var, m.head, x, n, fv_n)
        return Comp(head, var, source)
    if isinstance(m, Case):
        var, some = _under_binder(m.var, m.some_branch, x, n, fv_n)
        return Case(_subst(m.scrut, x, n, fv_n), _subst(m.none_branch, x, n, fv_n), var, some)
    return with_children(m, (_subst(k, x, n, fv_n) for k in children(m)))


def _under_binder(var, body, x, n, fv_n):
    if var == x or x not in free_vars(body):
        return var, body
    if var in fv_n:
        new = fresh_name(var, fv_n | free_vars(body))
        body = _subst(body, var, Var(new), frozenset((new,)))
        var = new
    return var, _subst(body, x, n, fv_n)


def _node_data(m: Term):
    match m:
        case Const(value, ty):
            return (ty, _lit_key(ty, value))
        case Prim(op, args):
            return (op, len(args))
        case RecordCons(fields):
            return tuple(l for l, _ in fields)
        case Project(_, label):
            return label
        case TableRef(name):
            return name
    return None


def term_eq_alpha(m: Term, n: Term) -> bool:
    """Structural equality up to renaming of bound variables."""
    return _aeq(m, n, {}, {}, 0)


def _aeq(a: Term, b: Term, ea: dict, eb: dict, depth: int) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        la, lb = ea.get(a.name), eb.get(b.name)
        if la is None and lb is None:
            return a.name == b.name
        return la == lb
    if _node_data(a) != _node_data(b):
        return False
    ka, kb = children(a), children(b)
    if len(ka) != len(kb):
        return False
    for i, (x, y) in enumerate(zip(ka, kb)):
        va, vb = binder_of(a, i), binder_of(b, i)
        if va is not None:
            if not _aeq(x, y, {**ea, va: depth}, {**eb, vb: depth}, depth + 1):
                return False
        elif not _aeq(x, y, ea, eb, depth):
            return False
    return True


# --------------------------------------------------------------------------
# Values
# --------------------------------------------------------------------------


class Value:
    """Runtime value.  Equality, hashing and ordering go through ``key()``."""

    def key(self):
        cached = self.__dict__.get("_key")
        if cached is None:
            cached = self._compute_key()
            object.__setattr__(self, "_key", cached)
        return cached

    def _compute_key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Value) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __lt__(self, other):
        return self.key() < other.key()


@dataclass(frozen=True, eq=False)
class VConst(Value):
    value: object
    ty: BaseTy

    @classmethod
    def of(cls, value) -> VConst:
        return cls(value, _base_of_literal(value))

    def _compute_key(self):
        return (2, _BASE_RANK[self.ty], _lit_key(self.ty, self.value))


@dataclass(frozen=True, eq=False)
class VNullT(Value):
    def _compute_key(self):
        return (0,)


@dataclass(frozen=True, eq=False)
class VNoneT(Value):
    def _compute_key(self):
        return (1,)


VNull = VNullT()
VNone = VNoneT()


@dataclass(frozen=True, eq=False)
class VSome(Value):
    value: Value

    def _compute_key(self):
        return (3, self.value.key())


@dataclass(frozen=True, eq=False)
class VRecord(Value):
    fields: tuple[tuple[str, Value], ...]

    def _compute_key(self):
        return (4, tuple(sorted((l, v.key()) for l, v in self.fields)))

    def get(self, label: str) -> Value:
        for name, v in self.fields:
            if name == label:
                return v
        raise KeyError(label)

    def as_dict(self) -> dict[str, Value]:
        return dict(self.fields)


@dataclass(frozen=True, eq=False)
class VSet(Value):
    """A set value; elements are always deduplicated and sorted."""

    elements: tuple[Value, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", _canonical(self.elements))

    def _compute_key(self):
        return (5, tuple(v.key() for v in self.elements))

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


def _canonical(elems) -> tuple[Value, ...]:
    unique = {}
    for v in elems:
        unique.setdefault(v.key(), v)
    return tuple(unique[k] for k in sorted(unique))


def make_set(elems: Iterable[Value]) -> VSet:
    return VSet(tuple(elems))


def canon(s: VSet) -> VSet:
    return VSet(s.elements)


def vrecord(**fields: Value) -> VRecord:
    return VRecord(tuple(fields.items()))

