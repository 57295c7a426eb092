import json
import logging
import random

import pytest

from conftest import DISEASES_JSON
from nullnrc.ast import BaseTy, VConst, VNull, Mode
from nullnrc.data import (
    ColumnDecl,
    Database,
    DuplicateTable,
    MalformedDocument,
    NullInNonNullable,
    Schema,
    TypeMismatch,
    load_database,
    load_database_file,
)
from nullnrc.gen import random_database, random_schema


def doc(rows, nullable_type=True):
    return json.dumps({"tables": {"diseases": {
        "columns": [{"name": "id", "type": "int", "nullable": False},
                    {"name": "name", "type": "string", "nullable": False},
                    {"name": "type", "type": "int", "nullable": nullable_type}],
        "rows": rows}}})


def test_load_diseases():
    db = load_database(DISEASES_JSON)
    assert db.schema.column("diseases", "type").nullable
    first = db.table("diseases")[0]
    assert first == (VConst(1, BaseTy.INT), VConst("covid-19", BaseTy.STRING), VNull)


def test_null_in_required_column():
    with pytest.raises(NullInNonNullable) as e:
        load_database(doc([[1, "a", 1], [None, "flu", 1]]))
    assert (e.value.table, e.value.column, e.value.row_index) == ("diseases", "id", 1)


def test_type_mismatch():
    with pytest.raises(TypeMismatch):
        load_database(doc([[1, 2, None]]))
    with pytest.raises(TypeMismatch):
        load_database(doc([[True, "a", None]]))


def test_duplicate_table():
    src = '{"tables": {"t": {"columns": [{"name": "a", "type": "int"}]}, "t": {"columns": [{"name": "a", "type": "int"}]}}}'
    with pytest.raises(DuplicateTable):
        load_database(src)


def test_malformed_documents():
    for src in ["[]", "{", '{"tables": []}', '{"tables": {"t": {}}}',
                '{"tables": {"t": {"columns": [{"name": "a", "type": "date"}]}}}',
                '{"tables": {"t": {"columns": []}}}',
                '{"tables": {"t": {"columns": [{"name": "a", "type": "int"}], "rows": [[1, 2]]}}}',
                '{"tables": {"t": {"columns": [{"name": "a", "type": "int"}, {"name": "a", "type": "int"}]}}}']:
        with pytest.raises(MalformedDocument):
            load_database(src)


def test_ints_are_accepted_as_floats():
    src = '{"tables": {"t": {"columns": [{"name": "a", "type": "float"}], "rows": [[1], [2.5]]}}}'
    db = load_database(src)
    assert {r[0] for r in db.table("t")} == {VConst(1.0, BaseTy.FLOAT), VConst(2.5, BaseTy.FLOAT)}


def test_duplicate_rows_are_dropped(caplog):
    src = doc([[1, "a", None], [1, "a", None], [2, "b", 3]])
    assert len(load_database(src).table("diseases")) == 2
    with caplog.at_level(logging.WARNING, logger="nullnrc"):
        load_database(src, warn_duplicates=True)
    assert "duplicate" in caplog.text


def test_rows_are_canonical():
    a = load_database(doc([[2, "b", 3], [1, "a", None]]))
    b = load_database(doc([[1, "a", None], [2, "b", 3]]))
    assert a == b


def test_load_is_deterministic():
    assert load_database(DISEASES_JSON) == load_database(DISEASES_JSON)


def test_constructed_databases_are_validated():
    schema = Schema({"t": (ColumnDecl("a", BaseTy.INT),)})
    with pytest.raises(NullInNonNullable):
        Database(schema, {"t": ((VNull,),)})
    with pytest.raises(TypeMismatch):
        Database(schema, {"t": ((VConst("x", BaseTy.STRING),),)})


def test_json_round_trip():
    rng = random.Random(1)
    for mode in Mode:
        for _ in range(50):
            db = random_database(rng, random_schema(rng, mode))
            again = load_database(json.dumps(db.to_json()))
            assert again == db
            # revalidating a loaded database is a no-op
            assert Database(again.schema, again.rows) == again


def test_load_file(tmp_path):
    p = tmp_path / "db.json"
    p.write_text(DISEASES_JSON, encoding="utf-8")
    assert load_database_file(p) == load_database(DISEASES_JSON)
