import pytest

from nullnrc.ast import (
    BaseTy,
    IsEmpty,
    Record,
    BOOL,
    INT,
    Mode,
    free_vars,
    subterms,
    term_eq_alpha,
)
from nullnrc.data import ColumnDecl, Schema
from nullnrc.evaluator import evaluate
from nullnrc.rewrite import (
    RULE_MODES,
    FuelExhausted,
    Rewriter,
    RuleId,
    format_trace,
    is_sql_normal_form,
    normalize,
    replay,
    step,
)
from nullnrc.surface import parse_term
from nullnrc.typecheck import check_subject_reduction, typecheck

SCHEMA = Schema({
    "t": (ColumnDecl("a", BaseTy.INT),),
    "u": (ColumnDecl("a", BaseTy.INT), ColumnDecl("k", BaseTy.STRING, nullable=True)),
})
N, O, U = Mode.NRC, Mode.NRC_OPT, Mode.NRC_NULL
ENV = {"b": BOOL, "x": Record((("a", INT),))}

# (rule, mode, input, output of one step)
GOLDEN = [
    ("ProjBeta", N, "{a = 1, b = true}.a", "1"),
    ("PrimDelta", N, "1 + 2", "3"),
    ("PrimDelta", U, "false && null", "false"),
    ("CompEmptyHead", N, "(for (y <- [1]) []) ++ [2]", "[] ++ [2]"),
    ("CompEmptySource", N, "for (y <- []) [y = 1]", "[]"),
    ("CompSingleton", N, "for (y <- [5]) [y + 1]", "[5 + 1]"),
    ("CompUnionHead", N, "for (y <- table t) ([y.a] ++ [y.a + 1])",
     "(for (y <- table t) [y.a]) ++ (for (y <- table t) [y.a + 1])"),
    ("CompUnionSource", N, "for (y <- [1] ++ [2]) [y]", "(for (y <- [1]) [y]) ++ (for (y <- [2]) [y])"),
    ("CompNested", N, "for (y <- for (z <- table t) [z.a]) [y + 1]", "for (z <- table t) for (y <- [z.a]) [y + 1]"),
    ("CompWhereSource", N, "for (y <- table t where 1 = 1) [y.a]", "(for (y <- table t) [y.a]) where 1 = 1"),
    ("WhereTrue", N, "[1] where true", "[1]"),
    ("WhereFalse", N, "[1] where false", "[]"),
    ("WhereEmpty", N, "([] where 1 = 1) ++ [1]", "[] ++ [1]"),
    ("WhereUnion", N, "([1] ++ [2]) where 1 = 2", "([1] where 1 = 2) ++ ([2] where 1 = 2)"),
    ("WhereComp", N, "(for (y <- table t) [y.a]) where 1 = 2", "for (y <- table t) ([y.a] where 1 = 2)"),
    ("WhereWhere", N, "([1] where 1 = 1) where 2 = 2", "[1] where (1 = 1 && 2 = 2)"),
    ("EmptyWrap", N, "empty([1])", "empty(for (e <- [1]) [{}])"),
    ("IfRecord", N, "if b then {a = 1} else {a = 2}", "{a = if b then {a = 1}.a else {a = 2}.a}"),
    ("IfWhere", N, "if b then [1] else []", "[1] where b"),
    ("IfSetNRC", N, "if b then [1] else [2]", "([1] where b) ++ ([2] where !b)"),
    ("CaseNone", O, "case none of {none -> 0 | some y -> y}", "0"),
    ("CaseSome", O, "case some 3 of {none -> 0 | some y -> y + 1}", "3 + 1"),
    ("WhereNull", U, "[1] where null", "[]"),
    ("IfSetNull", U, "if b then [1] else [2]", "([1] where b) ++ ([2] where isnull(b) || !b)"),
    ("IsNullNull", U, "isnull(null)", "true"),
    ("IsNullConst", U, "isnull(7)", "false"),
    ("PrimNullStrict", U, "1 + null", "null"),
    # side conditions met by renaming the inner binder
    ("CompNested", N, "for (y <- for (x <- table t) [x.a]) [x.a + y]",
     "for (w <- table t) for (y <- [w.a]) [x.a + y]"),
    ("WhereComp", N, "(for (x <- table t) [x.a]) where x.a = 1",
     "for (w <- table t) ([w.a] where x.a = 1)"),
]


@pytest.mark.parametrize("rule,mode,src,want", GOLDEN, ids=[f"{g[0]}-{i}" for i, g in enumerate(GOLDEN)])
def test_golden(rule, mode, src, want):
    m = parse_term(src)
    out = step(mode, m, SCHEMA, ENV)
    assert out is not None
    got, rid, _ = out
    assert rid is RuleId(rule)
    assert term_eq_alpha(got, parse_term(want)), got
    assert check_subject_reduction(mode, SCHEMA, m, got, env=ENV)


def test_every_rule_has_a_golden_case():
    assert {RuleId(g[0]) for g in GOLDEN} == set(RuleId)
    assert len(RuleId) >= 25


# -- mode gating -------------------------------------------------------------


def test_rules_only_fire_in_their_modes():
    assert RULE_MODES[RuleId.IF_SET_NULL] == {U}
    assert U not in RULE_MODES[RuleId.IF_SET_NRC]
    assert RULE_MODES[RuleId.CASE_SOME] == {O}


def test_nrc_if_split_is_not_used_under_nulls():
    _, rid, _ = step(U, parse_term("if b then [1] else [2]"), SCHEMA, ENV)
    assert rid is RuleId.IF_SET_NULL
    _, rid, _ = step(O, parse_term("if b then [1] else [2]"), SCHEMA, ENV)
    assert rid is RuleId.IF_SET_NRC


def test_null_split_keeps_null_conditions_on_the_else_side():
    m = parse_term("if 1 = null then [1] else [2]")
    n, _ = normalize(U, m, schema=SCHEMA)
    assert evaluate(U, None, {}, n) == evaluate(U, None, {}, m)


# -- strategy and normal forms ----------------------------------------------


def test_leftmost_outermost():
    # the outer where-true fires before the inner arithmetic
    _, rid, path = step(N, parse_term("[1 + 2] where true"), SCHEMA)
    assert rid is RuleId.WHERE_TRUE and path == ()


def test_primitive_with_table_data_is_not_folded():
    m = parse_term("for (y <- table t) [y.a + 0]")
    assert step(N, m, SCHEMA) is None


def test_false_absorbs_unknown_conjunct():
    n, _ = normalize(U, parse_term("for (y <- table u) where false && y.k = \"a\" yield y"), schema=SCHEMA)
    assert term_eq_alpha(n, parse_term("[]"))


def test_normalize_examples():
    n, trace = normalize(N, parse_term("for (y <- [1] ++ [2]) [y * 10]"), schema=SCHEMA)
    assert term_eq_alpha(n, parse_term("[10] ++ [20]"))
    assert trace
    n, _ = normalize(U, parse_term("[1] where isnull(null) && !isnull(3)"), schema=SCHEMA)
    assert term_eq_alpha(n, parse_term("[1]"))


def test_disease_query_is_already_normal():
    m = parse_term('for (x <- table diseases) where (x.name = "covid-19") yield x')
    schema = Schema({"diseases": (ColumnDecl("id", BaseTy.INT), ColumnDecl("name", BaseTy.STRING),
                                  ColumnDecl("type", BaseTy.INT, nullable=True))})
    n, trace = normalize(U, m, schema=schema)
    assert n == m and trace == []
    assert is_sql_normal_form(n, schema)


def test_is_sql_normal_form_examples():
    ok = [
        "[]",
        "for (y <- table t) [{a = y.a}]",
        "(for (y <- table t) [{a = y.a}] where y.a > 1) ++ [{a = 3}]",
        "for (y <- table t) for (z <- table u) [{a = y.a, k = z.k}] where y.a = z.a",
        "for (y <- table u) [{a = y.a}] where isnull(y.k)",
        # base-typed conditionals become CASE expressions
        "for (y <- table t) [{a = if y.a > 1 then 1 else 2}]",
    ]
    bad = [
        "for (y <- [1]) [{a = y}]",
        "for (y <- table t) [y.a]",
        "if b then [{a = 1}] else []",
        "for (y <- table t) [{a = {c = y.a}.c}]",
        "for (y <- table t) [{a = [y.a]}]",
    ]
    for src in ok:
        assert is_sql_normal_form(parse_term(src), SCHEMA), src
    for src in bad:
        assert not is_sql_normal_form(parse_term(src), SCHEMA), src


def test_empty_wrap_fires_once():
    n, trace = normalize(U, parse_term("[1] where empty(for (y <- table t) [y.a])"), schema=SCHEMA)
    assert sum(s.rule is RuleId.EMPTY_WRAP for s in trace) == 1
    assert step(U, n, SCHEMA) is None
    assert any(isinstance(s, IsEmpty) for s in subterms(n))


# -- traces ------------------------------------------------------------------


def test_replay_and_format():
    m = parse_term("for (y <- [1] ++ [2]) [y] where true")
    n, trace = normalize(N, m, schema=SCHEMA)
    assert replay(m, trace) == n
    lines = format_trace(trace).splitlines()
    assert len(lines) == len(trace)
    assert lines[1] == "CompSingleton @ 0 : for (y <- [1]) where true yield y ==> [1] where true"
    assert lines[0].startswith("CompUnionSource @ root : ")


def test_fuel_exhaustion_reports_partial_trace():
    m = parse_term("for (y <- [1] ++ [2] ++ [3]) [y] where true")
    with pytest.raises(FuelExhausted) as e:
        normalize(N, m, fuel=2, schema=SCHEMA)
    assert len(e.value.trace) == 2
    assert replay(m, e.value.trace) == e.value.term


def test_exact_fuel_is_enough():
    m = parse_term("[1] where true")
    n, trace = normalize(N, m, fuel=1, schema=SCHEMA)
    assert len(trace) == 1 and step(N, n, SCHEMA) is None


# -- per-step properties over the corpus ------------------------------------


def test_every_step_preserves_type_and_value(corpora):
    for mode, items in corpora.items():
        for it in items[:250]:
            rw = Rewriter(mode, it.schema)
            m = it.query
            values = [evaluate(mode, db, {}, m) for db in it.dbs]
            while (s := rw.step(m)) is not None:
                m2, rid = s[0], s[1]
                ty = typecheck(mode, it.schema, {}, m2, expected=it.ty)
                assert ty == it.ty, rid
                assert not free_vars(m2)
                assert [evaluate(mode, db, {}, m2) for db in it.dbs] == values, rid
                m = m2


def test_corpus_exercises_every_rule(corpora):
    seen = set()
    for mode, items in corpora.items():
        for it in items:
            _, trace = normalize(mode, it.query, schema=it.schema)
            seen.update(s.rule for s in trace)
    assert seen == set(RuleId)
