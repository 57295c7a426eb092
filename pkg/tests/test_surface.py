import pytest
from hypothesis import given, strategies as st

from nullnrc.ast import (
    BaseTy,
    Case,
    Comp,
    Const,
    EmptySet,
    If,
    NullLit,
    Option,
    Prim,
    Project,
    RecordCons,
    Singleton,
    SomeLit,
    TableRef,
    Union,
    Var,
    Where,
    INT,
    BOOL,
    Mode,
    Record,
    SetTy,
    term_eq_alpha,
)
from nullnrc.surface import ParseError, format_literal, parse_mode, parse_term, parse_type, pretty


def c(v):
    return Const.of(v)


def test_parse_if():
    assert parse_term("if x then [1] else []") == If(Var("x"), Singleton(c(1)), EmptySet())


def test_parse_disease_query():
    m = parse_term('for (x <- table diseases) where (x.name = "covid-19") yield x')
    cond = Prim("=", (Project(Var("x"), "name"), c("covid-19")))
    assert m == Comp(Where(Singleton(Var("x")), cond), "x", TableRef("diseases"))


def test_parse_case():
    assert parse_term("case m of { none -> 0 | some y -> y }") == Case(Var("m"), c(0), "y", Var("y"))


def test_parse_nested_some():
    assert parse_term("some some 1") == SomeLit(SomeLit(c(1)))


def test_multi_generator_sugar_nests_left_to_right():
    m = parse_term("for (x <- table s, y <- table t) where x.a = y.a yield {l = x.a}")
    inner = Where(Singleton(RecordCons((("l", Project(Var("x"), "a")),))),
                  Prim("=", (Project(Var("x"), "a"), Project(Var("y"), "a"))))
    assert m == Comp(Comp(inner, "y", TableRef("t")), "x", TableRef("s"))


def test_plain_comprehension_body():
    assert parse_term("for (x <- s) [x] ++ [1]") == Comp(Union(Singleton(Var("x")), Singleton(c(1))), "x", Var("s"))


def test_where_binds_looser_than_union():
    assert parse_term("[1] ++ [2] where b") == Where(Union(Singleton(c(1)), Singleton(c(2))), Var("b"))


def test_and_binds_tighter_than_or():
    m = parse_term("a || b && c")
    assert m == Prim("||", (Var("a"), Prim("&&", (Var("b"), Var("c")))))


def test_comparison_is_non_associative():
    with pytest.raises(ParseError):
        parse_term("1 < 2 < 3")


def test_arithmetic_precedence():
    m = parse_term("1 + 2 * 3 - 4")
    assert m == Prim("-", (Prim("+", (c(1), Prim("*", (c(2), c(3))))), c(4)))


def test_literals():
    assert parse_term("1.5") == Const(1.5, BaseTy.FLOAT)
    assert parse_term('"a\\"b"') == c('a"b')
    assert parse_term("-3") == c(-3)
    assert parse_term("null") == NullLit()


def test_comments_are_ignored():
    assert parse_term("# a comment\n[1] # trailing\n") == Singleton(c(1))


def test_keywords_are_not_variables():
    for kw in ("table", "where", "null"):
        with pytest.raises(ParseError):
            parse_term(f"for ({kw} <- s) [1]")


def test_keyword_labels_are_allowed():
    assert parse_term("x.type") == Project(Var("x"), "type")
    assert parse_term("{table = 1}.table") == Project(RecordCons((("table", c(1)),)), "table")


def test_parse_error_has_span_and_expectation():
    with pytest.raises(ParseError) as e:
        parse_term("if x then 1")
    err = e.value
    assert err.message and err.expected
    assert err.span.start == (1, 12)


def test_parse_types():
    assert parse_type("[{a: int, b: bool?}]") == SetTy(Record((("a", INT), ("b", Option(BOOL)))))
    assert parse_type("int??") == Option(Option(INT))


def test_parse_modes():
    assert parse_mode("nrc") is Mode.NRC
    assert parse_mode("opt") is Mode.NRC_OPT
    assert parse_mode("null") is Mode.NRC_NULL
    with pytest.raises(ValueError):
        parse_mode("sql")


def test_pretty_examples():
    assert pretty(Singleton(c(1))) == "[1]"
    assert pretty(Where(Singleton(Var("x")), NullLit())) == "[x] where null"
    assert pretty(Comp(Singleton(Var("x")), "x", TableRef("t"))) == "for (x <- table t) yield x"


def test_pretty_uses_minimal_parentheses():
    assert pretty(parse_term("(1 + 2) * 3")) == "(1 + 2) * 3"
    assert pretty(parse_term("1 + (2 * 3)")) == "1 + 2 * 3"
    assert pretty(parse_term("1 - (2 - 3)")) == "1 - (2 - 3)"
    assert pretty(parse_term("([1] where b) where c")) == "[1] where b where c"


def test_string_escapes_round_trip():
    for s in ['', 'a"b', "back\\slash", "new\nline", "O'Brien"]:
        assert parse_term(format_literal(s, BaseTy.STRING)) == c(s)


@given(st.text(max_size=12))
def test_any_string_literal_round_trips(s):
    assert parse_term(format_literal(s, BaseTy.STRING)) == c(s)


@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_float_literals_round_trip(x):
    m = parse_term(format_literal(x, BaseTy.FLOAT))
    assert m == Const(x, BaseTy.FLOAT)


@given(st.text(alphabet="forx(<-)[]{}=,.|+*ifthenelse 01\"#\n", max_size=30))
def test_parse_errors_stay_inside_the_input(src):
    try:
        parse_term(src)
    except ParseError as e:
        lines = src.split("\n")
        line, col = e.span.start
        assert 1 <= line <= len(lines)
        assert 1 <= col <= len(lines[line - 1]) + 1
        assert e.message


def test_round_trip_on_corpus(corpora):
    for items in corpora.values():
        for it in items:
            text = pretty(it.query)
            assert term_eq_alpha(parse_term(text), it.query), text
