"""Random schemas, databases and well-typed queries for property testing.

Everything is driven by a ``random.Random`` so a seed reproduces a corpus
exactly.  Terms are generated type-directed and then confirmed by the
typechecker; candidates it rejects are discarded and redrawn.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ast import (
    BOOL,
    INT,
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
    Var,
    VConst,
    VNull,
    Where,
    is_flat_relation,
    subterms,
    term_depth,
)
from .data import ColumnDecl, Database, Schema
from .typecheck import TypingError, table_row_type, typecheck

BINDERS = ("x", "y", "z")
TABLE_NAMES = ("r", "s", "t")
COLUMN_NAMES = ("a", "b", "c", "d")
LABELS = ("a", "b", "c", "e")

_INTS = (-2, -1, 0, 1, 2, 3)
_FLOATS = (-2.0, 0.0, 0.5, 1.5)
_STRINGS = ("", "a", "b", "O'Brien")
_BASES = (BaseTy.INT, BaseTy.INT, BaseTy.STRING, BaseTy.BOOL, BaseTy.FLOAT)


def random_literal(rng: random.Random, b: BaseTy):
    if b is BaseTy.INT:
        return rng.choice(_INTS)
    if b is BaseTy.BOOL:
        return rng.random() < 0.5
    if b is BaseTy.STRING:
        return rng.choice(_STRINGS)
    return rng.choice(_FLOATS)


def random_schema(rng: random.Random, mode: Mode, max_tables: int = 3, max_cols: int = 3) -> Schema:
    tables = {}
    for name in TABLE_NAMES[: rng.randint(1, max_tables)]:
        cols = rng.sample(COLUMN_NAMES, rng.randint(1, max_cols))
        decls = []
        for c in cols:
            nullable = mode is not Mode.NRC and rng.random() < 0.4
            decls.append(ColumnDecl(c, rng.choice(_BASES), nullable))
        tables[name] = tuple(decls)
    return Schema(tables)


def random_database(rng: random.Random, schema: Schema, max_rows: int = 5) -> Database:
    rows = {}
    for name, cols in schema.tables.items():
        table = []
        for _ in range(rng.randint(0, max_rows)):
            row = []
            for c in cols:
                if c.nullable and rng.random() < 0.3:
                    row.append(VNull)
                else:
                    row.append(VConst(random_literal(rng, c.ty), c.ty))
            table.append(tuple(row))
        rows[name] = tuple(table)
    return Database(schema, rows)


class _Retry(Exception):
    pass


class TermGen:
    """Type-directed generator for one mode and schema."""

    def __init__(self, rng: random.Random, mode: Mode, schema: Schema):
        self.rng = rng
        self.mode = mode
        self.schema = schema
        self.rows = {t: table_row_type(mode, schema, t) for t in schema.tables}

    # -- types -----------------------------------------------------------

    def base_ty(self) -> Base:
        return Base(self.rng.choice(_BASES))

    def flat_record(self) -> Record:
        labels = self.rng.sample(LABELS, self.rng.randint(1, 3))
        return Record(tuple((l, self.base_ty()) for l in labels))

    def flat_relation(self) -> SetTy:
        r = self.rng.random()
        flat_rows = [row for row in self.rows.values() if all(isinstance(t, Base) for _, t in row.fields)]
        if flat_rows and r < 0.35:
            return SetTy(self.rng.choice(flat_rows))
        return SetTy(self.flat_record())

    def option_ty(self) -> Option:
        rng = self.rng
        r = rng.random()
        if r < 0.5:
            return Option(self.base_ty())
        if r < 0.8:
            return Option(Record((("a", Option(self.base_ty())), ("b", BOOL))))
        return Option(Option(self.base_ty()))

    def query_ty(self) -> Ty:
        rng = self.rng
        r = rng.random()
        if r < 0.65:
            return self.flat_relation()
        if r < 0.73:
            return SetTy(self.base_ty())
        if r < 0.81:
            inner = SetTy(self.flat_record())
            return SetTy(Record((("k", self.base_ty()), ("s", inner))))
        if self.mode is Mode.NRC_OPT and r < 0.93:
            return rng.choice([self.option_ty(), SetTy(Record((("o", self.option_ty()), ("k", INT))))])
        return rng.choice([self.base_ty(), self.flat_record(), BOOL])

    # -- helpers ---------------------------------------------------------

    def chance(self, p: float) -> bool:
        return self.rng.random() < p

    def const(self, b: BaseTy) -> Const:
        return Const(random_literal(self.rng, b), b)

    def paths(self, env: dict[str, Ty], ty: Ty) -> list[Term]:
        """Variables and one-step projections of variables that have type ``ty``."""
        out: list[Term] = []
        for x, t in env.items():
            if t == ty:
                out.append(Var(x))
            if isinstance(t, Record):
                for l, ft in t.fields:
                    if ft == ty:
                        out.append(Project(Var(x), l))
        return out

    # -- terms -----------------------------------------------------------

    def gen(self, ty: Ty, env: dict[str, Ty], depth: int) -> Term:
        rng = self.rng
        paths = self.paths(env, ty)
        if paths and self.chance(0.35 if depth > 0 else 0.7):
            return rng.choice(paths)
        if depth > 0:
            r = rng.random()
            if r < 0.08:
                return If(self.gen(BOOL, env, depth - 1), self.gen(ty, env, depth - 1), self.gen(ty, env, depth - 1))
            if r < 0.13:
                return self.via_record(ty, env, depth)
            if self.mode is Mode.NRC_OPT and r < 0.2:
                return self.case(ty, env, depth)
        match ty:
            case Base(b):
                return self.base(b, env, depth)
            case Record(fields):
                return RecordCons(tuple((l, self.gen(ft, env, depth - 1)) for l, ft in fields))
            case SetTy(elem):
                return self.set_(elem, env, depth)
            case Option(inner):
                if depth <= 0 or self.chance(0.3):
                    return NoneLit()
                return SomeLit(self.gen(inner, env, depth - 1))
        raise _Retry()

    def via_record(self, ty, env, depth) -> Term:
        label = self.rng.choice(LABELS)
        other = self.rng.choice([l for l in LABELS if l != label])
        fields = [(label, self.gen(ty, env, depth - 1)), (other, self.gen(self.base_ty(), env, 0))]
        self.rng.shuffle(fields)
        return Project(RecordCons(tuple(fields)), label)

    def case(self, ty, env, depth) -> Term:
        inner = self.option_ty().inner if self.chance(0.5) else self.base_ty()
        scrut = self.gen(Option(inner), env, depth - 1)
        if isinstance(scrut, NoneLit):
            scrut = If(self.gen(BOOL, env, 0), NoneLit(), SomeLit(self.gen(inner, env, 0)))
        x = self.rng.choice(BINDERS)
        return Case(scrut, self.gen(ty, env, depth - 1), x, self.gen(ty, {**env, x: inner}, depth - 1))

    def base(self, b: BaseTy, env, depth) -> Term:
        rng = self.rng
        if depth <= 0 or self.chance(0.25):
            if self.mode is Mode.NRC_NULL and self.chance(0.12):
                return NullLit()
            return self.const(b)
        r = rng.random()
        if b in (BaseTy.INT, BaseTy.FLOAT) and r < 0.6:
            op = rng.choice("+-*/")
            left = self.gen(Base(b), env, depth - 1)
            if op == "/":
                v = 0
                while v == 0:
                    v = random_literal(rng, b)
                return Prim("/", (left, Const(v, b)))
            return Prim(op, (left, self.gen(Base(b), env, depth - 1)))
        if b is BaseTy.BOOL:
            if r < 0.35:
                t = Base(rng.choice(_BASES))
                op = rng.choice(("=", "<>", "<", "<=", ">", ">="))
                return Prim(op, (self.gen(t, env, depth - 1), self.gen(t, env, depth - 1)))
            if r < 0.6:
                op = rng.choice(("&&", "||", "!"))
                if op == "!":
                    return Prim("!", (self.gen(BOOL, env, depth - 1),))
                return Prim(op, (self.gen(BOOL, env, depth - 1), self.gen(BOOL, env, depth - 1)))
            if r < 0.75:
                elem = self.rng.choice([self.flat_record(), self.base_ty(), self.flat_relation().elem])
                return IsEmpty(self.gen(SetTy(elem), env, depth - 1))
            if r < 0.9 and self.mode is Mode.NRC_NULL:
                return IsNull(self.gen(self.base_ty(), env, depth - 1))
        if self.mode is Mode.NRC_NULL and self.chance(0.1):
            return NullLit()
        return self.const(b)

    def set_(self, elem: Ty, env, depth) -> Term:
        rng = self.rng
        tables = [t for t, row in self.rows.items() if row == elem]
        if tables and self.chance(0.5 if depth > 0 else 0.8):
            return TableRef(rng.choice(tables))
        if depth <= 0:
            if self.chance(0.3):
                return EmptySet()
            return Singleton(self.gen(elem, env, 0))
        r = rng.random()
        if r < 0.45:
            return self.comp(elem, env, depth)
        if r < 0.6:
            return Where(self.gen(SetTy(elem), env, depth - 1), self.gen(BOOL, env, depth - 1))
        if r < 0.72:
            return Union(self.gen(SetTy(elem), env, depth - 1), self.gen(SetTy(elem), env, depth - 1))
        if r < 0.95:
            return Singleton(self.gen(elem, env, depth - 1))
        return EmptySet()

    def comp(self, elem: Ty, env, depth) -> Term:
        rng = self.rng
        if self.rows and self.chance(0.7):
            name = rng.choice(list(self.rows))
            source: Term = TableRef(name)
            src_elem: Ty = self.rows[name]
            if self.chance(0.2):
                source = Where(source, self.gen(BOOL, env, 0))
        else:
            src_elem = rng.choice([self.flat_record(), self.base_ty()])
            source = self.gen(SetTy(src_elem), env, depth - 1)
            if isinstance(source, EmptySet):
                source = Singleton(self.gen(src_elem, env, 0))
        x = rng.choice(BINDERS)
        head = self.gen(SetTy(elem), {**env, x: src_elem}, depth - 1)
        return Comp(head, x, source)


# --------------------------------------------------------------------------
# Corpora
# --------------------------------------------------------------------------


@dataclass
class CorpusItem:
    mode: Mode
    schema: Schema
    query: Term
    ty: Ty
    dbs: list[Database] = field(default_factory=list)

    @property
    def is_flat(self) -> bool:
        """Flat-to-flat: flat result type and only flat tables referenced."""
        if not is_flat_relation(self.ty):
            return False
        for s in subterms(self.query):
            if isinstance(s, TableRef):
                row = table_row_type(self.mode, self.schema, s.name)
                if not all(isinstance(t, Base) for _, t in row.fields):
                    return False
        return True


def random_query(rng: random.Random, mode: Mode, schema: Schema, ty: Ty | None = None,
                 depth: int = 5, max_depth: int = 7, attempts: int = 200) -> tuple[Term, Ty]:
    g = TermGen(rng, mode, schema)
    for _ in range(attempts):
        want = ty if ty is not None else g.query_ty()
        try:
            m = g.gen(want, {}, depth)
        except _Retry:
            continue
        if term_depth(m) > max_depth:
            continue
        try:
            got = typecheck(mode, schema, {}, m, expected=want)
        except TypingError:
            continue
        return m, got
    raise RuntimeError("could not generate a well-typed query")


def make_corpus(mode: Mode, n: int, seed: int = 0, dbs_per_item: int = 2) -> list[CorpusItem]:
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        schema = random_schema(rng, mode)
        q, ty = random_query(rng, mode, schema)
        dbs = [random_database(rng, schema) for _ in range(dbs_per_item)]
        out.append(CorpusItem(mode, schema, q, ty, dbs))
    return out


def random_closed_term(rng: random.Random, mode: Mode, depth: int = 4) -> tuple[Term, Ty, Schema]:
    """A well-typed term over a fresh random schema, for syntax tests."""
    schema = random_schema(rng, mode)
    q, ty = random_query(rng, mode, schema, depth=depth)
    return q, ty, schema
