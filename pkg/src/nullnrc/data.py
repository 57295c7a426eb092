"""Schemas and in-memory databases loaded from JSON.

The document shape is::

    {"tables": {"diseases": {"columns": [{"name": "id", "type": "int",
                                          "nullable": false}, ...],
                             "rows": [[1, "covid-19", null], ...]}}}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .ast import BaseTy, Value, VConst, VNull

log = logging.getLogger(__name__)


class LoadError(ValueError):
    pass


class MalformedDocument(LoadError):
    pass


class DuplicateTable(LoadError):
    pass


class TypeMismatch(LoadError):
    pass


class NullInNonNullable(LoadError):
    def __init__(self, table: str, column: str, row_index: int):
        super().__init__(f"null in non-nullable column {table}.{column} (row {row_index})")
        self.table = table
        self.column = column
        self.row_index = row_index


@dataclass(frozen=True)
class ColumnDecl:
    name: str
    ty: BaseTy
    nullable: bool = False


@dataclass(frozen=True)
class Schema:
    tables: dict[str, tuple[ColumnDecl, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for name, cols in self.tables.items():
            if not cols:
                raise MalformedDocument(f"table {name} has no columns")
            names = [c.name for c in cols]
            if len(set(names)) != len(names):
                raise MalformedDocument(f"duplicate column names in table {name}")

    def columns(self, table: str) -> tuple[ColumnDecl, ...]:
        return self.tables[table]

    def column(self, table: str, name: str) -> ColumnDecl | None:
        for c in self.tables.get(table, ()):
            if c.name == name:
                return c
        return None

    def __contains__(self, table: str) -> bool:
        return table in self.tables

    def __hash__(self):
        return hash(tuple(sorted(self.tables.items())))


Row = tuple[Value, ...]


@dataclass(frozen=True)
class Database:
    schema: Schema
    rows: dict[str, tuple[Row, ...]]

    def __post_init__(self):
        canon = {}
        for name in self.schema.tables:
            rows = self.rows.get(name, ())
            for i, row in enumerate(rows):
                _check_row(self.schema, name, row, i)
            canon[name] = _canonical_rows(rows)
        object.__setattr__(self, "rows", canon)

    def table(self, name: str) -> tuple[Row, ...]:
        return self.rows[name]

    def to_json(self) -> dict:
        tables = {}
        for name, cols in self.schema.tables.items():
            tables[name] = {
                "columns": [
                    {"name": c.name, "type": c.ty.value, "nullable": c.nullable} for c in cols
                ],
                "rows": [[None if v is VNull else v.value for v in row] for row in self.rows[name]],
            }
        return {"tables": tables}


def _canonical_rows(rows) -> tuple[Row, ...]:
    unique = {tuple(v.key() for v in row): tuple(row) for row in rows}
    return tuple(unique[k] for k in sorted(unique))


def _check_row(schema: Schema, table: str, row: Row, index: int) -> None:
    cols = schema.tables[table]
    if len(row) != len(cols):
        raise MalformedDocument(
            f"row {index} of {table} has {len(row)} values, expected {len(cols)}"
        )
    for col, v in zip(cols, row):
        if v is VNull:
            if not col.nullable:
                raise NullInNonNullable(table, col.name, index)
        elif not (isinstance(v, VConst) and v.ty is col.ty):
            raise TypeMismatch(f"{table}.{col.name} (row {index}): expected {col.ty}, got {v!r}")


_TYPE_NAMES = {t.value: t for t in BaseTy}


def cell_value(raw, ty: BaseTy) -> Value:
    """Convert one JSON cell to a value of base type ``ty`` (None gives null)."""
    if raw is None:
        return VNull
    if ty is BaseTy.BOOL and isinstance(raw, bool):
        return VConst(raw, ty)
    if ty is BaseTy.INT and isinstance(raw, int) and not isinstance(raw, bool):
        return VConst(raw, ty)
    if ty is BaseTy.FLOAT and isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return VConst(float(raw), ty)
    if ty is BaseTy.STRING and isinstance(raw, str):
        return VConst(raw, ty)
    raise TypeMismatch(f"expected {ty}, got {raw!r}")


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise DuplicateTable(f"duplicate key {k!r}")
        out[k] = v
    return out


def load_database(src: str, warn_duplicates: bool = False) -> Database:
    try:
        doc = json.loads(src, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("tables"), dict):
        raise MalformedDocument('expected an object with a "tables" object')
    tables, rows = {}, {}
    for name, spec in doc["tables"].items():
        if not isinstance(spec, dict) or not isinstance(spec.get("columns"), list):
            raise MalformedDocument(f"table {name}: expected a columns list")
        cols = []
        for c in spec["columns"]:
            try:
                ty = _TYPE_NAMES[c["type"]]
                cols.append(ColumnDecl(c["name"], ty, bool(c.get("nullable", False))))
            except (KeyError, TypeError):
                raise MalformedDocument(f"table {name}: bad column declaration {c!r}") from None
        tables[name] = tuple(cols)
        table_rows = []
        raw_rows = spec.get("rows", [])
        if not isinstance(raw_rows, list):
            raise MalformedDocument(f"table {name}: rows must be a list")
        for i, raw in enumerate(raw_rows):
            if not isinstance(raw, list) or len(raw) != len(cols):
                raise MalformedDocument(f"table {name}: row {i} must have {len(cols)} values")
            row = []
            for col, cell in zip(cols, raw):
                if cell is None and not col.nullable:
                    raise NullInNonNullable(name, col.name, i)
                try:
                    row.append(cell_value(cell, col.ty))
                except TypeMismatch as e:
                    raise TypeMismatch(f"{name}.{col.name} (row {i}): {e}") from None
            table_rows.append(tuple(row))
        if warn_duplicates:
            distinct = len({tuple(v.key() for v in r) for r in table_rows})
            if distinct != len(table_rows):
                log.warning("table %s: %d duplicate rows dropped", name, len(table_rows) - distinct)
        rows[name] = tuple(table_rows)
    return Database(Schema(tables), rows)


def load_database_file(path, warn_duplicates: bool = False) -> Database:
    with open(path, encoding="utf-8") as f:
        return load_database(f.read(), warn_duplicates=warn_duplicates)
