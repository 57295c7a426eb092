import pytest

from conftest import DISEASE_QUERY, three_handlers
from nullnrc.ast import (
    Const,
    Record,
    SetTy,
    VConst,
    VNone,
    VNull,
    VRecord,
    VSet,
    VSome,
    INT,
    STRING,
    Mode,
    free_vars,
)
from nullnrc.evaluator import evaluate
from nullnrc.handlers import (
    Default,
    Optional,
    Required,
    decode_host_side,
    desugar_db_side,
    make_handler,
    nullable_labels,
    parse_handler,
    residual,
)
from nullnrc.rewrite import is_sql_normal_form, normalize
from nullnrc.surface import ParseError, parse_term
from nullnrc.typecheck import typecheck

ROW = SetTy(Record((("id", INT), ("name", STRING), ("type", INT))))


def v(x):
    return VConst(x, Const.of(x).ty)


def row(**fields):
    return VRecord(tuple(fields.items()))


def disease(db, handler_src):
    q = parse_term(DISEASE_QUERY)
    ty = typecheck(Mode.NRC_NULL, db.schema, {}, q)
    h = parse_handler(handler_src, ty)
    return evaluate(Mode.NRC_NULL, db, {}, desugar_db_side(h, q)), h, q


# -- parsing -----------------------------------------------------------------


def test_parse_default_handler():
    h = parse_handler("<id: required, name: required, type: default -1>", ROW)
    assert h.policies == {"id": Required(), "name": Required(), "type": Default(Const.of(-1))}


def test_parse_required_handler():
    h = parse_handler("<id: required, name: required, type: required>", ROW)
    assert set(h.policies.values()) == {Required()}


def test_unmentioned_nullable_fields_are_optional():
    h = parse_handler("<id: required>", ROW, nullable={"id", "type"})
    assert h.policies == {"id": Required(), "type": Optional()}


def test_parse_errors():
    for src in ("<bogus: required>", "<type: default \"x\">", "<id: required, id: optional>",
                "<id: maybe>", "<id: required", "<id: required> extra"):
        with pytest.raises(ParseError):
            parse_handler(src, ROW)


def test_unknown_label_error_names_the_label():
    with pytest.raises(ParseError) as e:
        parse_handler("<bogus: required>", ROW)
    assert "bogus" in e.value.message


def test_handlers_need_flat_rows():
    with pytest.raises(ValueError):
        parse_handler("<>", SetTy(INT))


# -- database side -----------------------------------------------------------


def test_default_handler_end_to_end(diseases_db):
    got, _, _ = disease(diseases_db, "<id: required, name: required, type: default -1>")
    assert {r.get("type") for r in got} == {v(-1), v(2)}


def test_required_handler_end_to_end(diseases_db):
    got, _, _ = disease(diseases_db, "<id: required, name: required, type: required>")
    assert got == VSet((row(id=v(3), name=v("covid-19"), type=v(2)),))


def test_optional_handler_is_identity_on_the_database(diseases_db):
    got, _, q = disease(diseases_db, "<type: optional>")
    assert got == evaluate(Mode.NRC_NULL, diseases_db, {}, q)


def test_desugared_queries_stay_normalizable(diseases_db):
    q = parse_term(DISEASE_QUERY)
    ty = typecheck(Mode.NRC_NULL, diseases_db.schema, {}, q)
    for h in three_handlers(ty):
        n, _ = normalize(Mode.NRC_NULL, desugar_db_side(h, q), schema=diseases_db.schema)
        assert is_sql_normal_form(n, diseases_db.schema)


def test_desugar_avoids_capturing_free_h():
    q = parse_term("for (x <- [h]) [x]")
    out = desugar_db_side(make_handler(SetTy(Record((("a", INT),))), {"a": Required()}), q)
    assert out.var != "h"
    assert free_vars(out) == {"h"}


# -- host side ---------------------------------------------------------------


def test_host_side_examples():
    ty = SetTy(Record((("id", INT), ("type", INT))))
    rows = VSet((row(id=v(1), type=VNull),))
    opt = make_handler(ty, {"type": Optional()}, nullable={"type"})
    assert decode_host_side(opt, rows, ty) == VSet((row(id=v(1), type=VNone),))
    req = make_handler(ty, {"type": Required()}, nullable={"type"})
    assert decode_host_side(req, rows, ty) == VSet()
    present = VSet((row(id=v(1), type=v(2)),))
    for h in three_handlers(ty):
        assert {r.get("type") for r in decode_host_side(h, present, ty)} <= {v(2), VSome(v(2))}


def test_residual():
    h = make_handler(ROW, {"id": Optional(), "type": Default(Const.of(0))})
    assert residual(h).policies == {"id": Optional(), "name": Optional(), "type": Required()}


def test_host_side_shape_errors():
    with pytest.raises(ValueError):
        decode_host_side(make_handler(ROW, {}), v(1))


# -- nullability analysis ----------------------------------------------------


def test_nullable_labels(diseases_db):
    s = diseases_db.schema
    assert nullable_labels(parse_term(DISEASE_QUERY), s) == {"type"}
    q = parse_term("for (x <- table diseases) [{a = x.id, b = x.type + 1, c = null}]")
    assert nullable_labels(q, s) == {"b", "c"}
    assert nullable_labels(parse_term("for (x <- [1]) [{a = x}]"), s) is None


# -- properties --------------------------------------------------------------


def flat_record_items(corpora):
    return [
        it for it in corpora[Mode.NRC_NULL]
        if it.is_flat and isinstance(it.ty.elem, Record) and it.ty.elem.fields
    ]


def test_required_never_adds_rows(corpora):
    for it in flat_record_items(corpora)[:150]:
        row_ty = it.ty.elem
        for l in row_ty.labels:
            weak = make_handler(it.ty, {l: Optional()})
            strong = make_handler(it.ty, {l: Required()})
            for db in it.dbs:
                rows = evaluate(Mode.NRC_NULL, db, {}, it.query)
                assert len(decode_host_side(strong, rows)) <= len(decode_host_side(weak, rows))


def test_database_and_host_side_agree(corpora):
    items = flat_record_items(corpora)
    assert len(items) > 100
    for it in items[:200]:
        for h in three_handlers(it.ty):
            for db in it.dbs:
                host = decode_host_side(h, evaluate(Mode.NRC_NULL, db, {}, it.query), it.ty)
                side = evaluate(Mode.NRC_NULL, db, {}, desugar_db_side(h, it.query))
                assert decode_host_side(residual(h), side, it.ty) == host
