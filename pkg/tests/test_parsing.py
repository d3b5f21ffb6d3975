from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from test_sets import FIN, TUPLES, _ok, expand, preds
from ppdb.aggregates import Aggregate
from ppdb.algebra import (
    As,
    Dedup,
    EmptyConst,
    Extract,
    NaturalJoin,
    Project,
    Rename,
    Select,
    SingletonConst,
)
from ppdb.datalog import Atom, Program, Rule, Var
from ppdb.errors import ParseError
from ppdb.instances import Fact
from ppdb.parsing import (
    format_pred,
    looks_like_datalog,
    parse_datalog,
    parse_pred,
    parse_query,
    parse_set,
    tokenize,
)
from ppdb.sets import (
    TRUE,
    And,
    Equals,
    FactSetExpr,
    InSet,
    Interval,
    Not,
    Or,
    PairEquals,
    PairLess,
    contains,
)


def test_query_syntax():
    q = parse_query("project(select(R join T, A <= 1 and C = \"p\"), C, A)")
    assert q == Project(
        Select(NaturalJoin(Extract("R"), Extract("T")), And((Interval("A", None, 1), Equals("C", "p")))), ("C", "A")
    )
    assert parse_query("dedup(rename(R, A -> Z)) as W") == As(Dedup(Rename(Extract("R"), "A", "Z")), "W")
    assert parse_query("R uplus S minus R") == Extract("R").uplus(Extract("S")).minus(Extract("R"))
    assert parse_query("R uplus (S minus R)") == Extract("R").uplus(Extract("S").minus(Extract("R")))
    assert parse_query("empty R") == EmptyConst("R") and parse_query("empty") == EmptyConst()
    assert parse_query('one R(1, "x", -2.5)') == SingletonConst("R", (1, "x", -2.5))
    assert parse_query("agg(R, group B, SUM(A))") == Aggregate(Extract("R"), "SUM", "A", ("B",))
    assert parse_query("agg(R, CNT(A))") == Aggregate(Extract("R"), "CNT", "A")


def test_predicate_syntax():
    assert parse_pred("A < 3") == Interval("A", None, 3, True, False)
    assert parse_pred("A >= 3") == Interval("A", 3, None)
    assert parse_pred("A < B") == PairLess("A", "B")
    assert parse_pred("A > B") == PairLess("B", "A")
    assert parse_pred("#0 = #1") == PairEquals(0, 1)
    assert parse_pred("A != 2") == Not(Equals("A", 2))
    assert parse_pred("A in {1, 2}") == InSet("A", frozenset({1, 2}))
    assert parse_pred("A in (-inf, 2]") == Interval("A", None, 2, False, True)
    assert parse_pred("A = 1 or not (B = 2 and true)") == Or((Equals("A", 1), Not(And((Equals("B", 2), TRUE)))))


def test_fact_set_syntax():
    f = parse_set("R: A = 1; *: true")
    assert f == FactSetExpr({"R": Equals("A", 1)}, TRUE)
    assert parse_set("") == FactSetExpr({}, None)


def test_datalog_syntax():
    src = """
    % transitive closure
    T(X, Y) :- E(X, Y).
    T(X, Z) :- T(X, Y), E(Y, Z).
    Hot(X, "yes") :- E(X, _), Col(X, red).
    #output T
    """
    p = parse_datalog(src)
    X, Y = Var("X"), Var("Y")
    assert p.output == "T"
    assert p.rules[0] == Rule(Atom("T", (X, Y)), (Atom("E", (X, Y)),))
    assert p.rules[2].head == Atom("Hot", (X, "yes"))
    assert p.rules[2].body[1] == Atom("Col", (X, "red"))
    assert isinstance(p.rules[2].body[0].terms[1], Var)
    assert parse_datalog(str(p)) == p
    assert parse_datalog("P(X) :- E(X, X).").output == "P"
    assert parse_datalog(src, output="Hot").output == "Hot"
    assert parse_datalog("#output Out") == Program((), "Out")
    assert looks_like_datalog(src) and not looks_like_datalog("R join S")


def test_tokens_carry_positions():
    toks = tokenize('R\n  join "a\\"b" % note\n 1.5e3 -inf')
    kinds = [(t.kind, t.line, t.col) for t in toks if t.kind != "eof"]
    assert kinds == [("name", 1, 1), ("name", 2, 3), ("str", 2, 8), ("num", 3, 2), ("num", 3, 8)]
    assert toks[2].value == 'a"b' and toks[3].value == 1500.0 and toks[4].value == float("-inf")


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("R uplus", 1, 8),
        ("select(R, A <)", 1, 14),
        ("R join\n  (S", 2, 5),
        ("R $ S", 1, 3),
        ('one R("abc', 1, 7),
    ],
)
def test_errors_point_at_the_offending_token(text, line, col):
    with pytest.raises(ParseError) as e:
        parse_query(text)
    assert (e.value.line, e.value.column) == (line, col)
    rendered = e.value.render().splitlines()
    assert rendered[-1].index("^") - 2 == col - 1


def test_datalog_errors():
    with pytest.raises(ParseError):
        parse_datalog("T(X) :- E(X)")
    with pytest.raises(ParseError):
        parse_datalog("#input E")
    with pytest.raises(ParseError):
        parse_datalog("")


@given(st.integers(0, 2**32))
@settings(max_examples=200)
def test_printed_queries_parse_back(seed):
    q = O.build(O.random_query(random.Random(seed), depth=3))
    assert parse_query(str(q)) == q


@given(preds.filter(_ok))
def test_formatted_predicates_keep_their_meaning(p):
    back = parse_pred(format_pred(p))
    assert expand(back) == expand(p)
    f, g = FactSetExpr.of("R", p), FactSetExpr.of("R", back)
    assert all(contains(f, Fact("R", t), FIN) == contains(g, Fact("R", t), FIN) for t in TUPLES)
