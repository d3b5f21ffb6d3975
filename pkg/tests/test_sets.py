from __future__ import annotations

import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppdb.errors import BadAttributePosition, BadRange, DomainMismatch, UnknownRelation
from ppdb.instances import Fact
from ppdb.schema import Categorical, IntegerAll, IntegerRange, RealInterval, Schema
from ppdb.sets import (
    FALSE,
    TRUE,
    And,
    Const,
    Equals,
    FactSetExpr,
    InSet,
    Interval,
    Not,
    Or,
    PairEquals,
    PairLess,
    bind,
    contains,
    intersects,
    pred_from_json,
    set_from_json,
    set_to_json,
    type_check,
)

REAL = Schema({"A": RealInterval(), "B": RealInterval()}, {"R": ("A", "B"), "U": ("A",)})
FIN = Schema(
    {"A": IntegerRange(0, 3), "B": IntegerRange(0, 3), "C": Categorical(("lo", "mid", "hi"))},
    {"R": ("A", "B", "C"), "S": ("A",)},
).validated()


def test_interval_right_open_endpoint():
    f = FactSetExpr.of("U", Interval("A", 0, 1, True, False))
    assert not contains(f, Fact("U", (1.0,)), REAL)
    assert contains(f, Fact("U", (0.0,)), REAL)
    assert contains(f, Fact("U", (math.nextafter(1.0, 0),)), REAL)


def test_pair_equality_diagonal():
    f = FactSetExpr.of("R", PairEquals("A", "B"))
    assert contains(f, Fact("R", (3.0, 3.0)), REAL)
    assert not contains(f, Fact("R", (3.0, 4.0)), REAL)


def test_negated_membership():
    f = FactSetExpr.of("S", Not(InSet("A", frozenset({1, 2}))))
    assert not contains(f, Fact("S", (2,)), FIN)
    assert contains(f, Fact("S", (3,)), FIN)


def test_fact_of_other_relation_not_contained():
    f = FactSetExpr.of("S", TRUE)
    assert not contains(f, Fact("R", (0, 0, "lo")), FIN)
    assert contains(FactSetExpr.full(), Fact("R", (0, 0, "lo")), FIN)


def test_type_check_errors():
    mixed = Schema({"A": IntegerRange(0, 3), "C": Categorical(("x",))}, {"R": ("A", "C")})
    with pytest.raises(DomainMismatch):
        type_check(FactSetExpr.of("R", PairLess("A", "C")), mixed)
    with pytest.raises(BadRange):
        type_check(FactSetExpr.of("R", Interval("C", "hi", "lo")), FIN)
    with pytest.raises(BadAttributePosition):
        type_check(FactSetExpr.of("S", Equals(1, 0)), FIN)
    with pytest.raises(BadAttributePosition):
        type_check(FactSetExpr.of("S", Equals("Z", 0)), FIN)
    with pytest.raises(UnknownRelation):
        type_check(FactSetExpr.of("Q"), FIN)
    with pytest.raises(DomainMismatch):
        type_check(FactSetExpr.of("S", Equals("A", "x")), FIN)
    type_check(FactSetExpr.of("R", And((Interval("C", "lo", "mid"), PairLess(0, 1)))), FIN)


def test_categorical_interval_and_order():
    f = FactSetExpr.of("R", Interval("C", "lo", "mid", True, False))
    assert contains(f, Fact("R", (0, 0, "lo")), FIN)
    assert not contains(f, Fact("R", (0, 0, "mid")), FIN)
    pair = Schema({"C": Categorical(("b", "a")), "D": Categorical(("b", "a"))}, {"P": ("C", "D")})
    # category order is declaration order, not string order
    assert contains(FactSetExpr.of("P", PairLess("C", "D")), Fact("P", ("b", "a")), pair)


def test_decimal_string_endpoints():
    obj = {"U": {"op": "and", "args": [{"atom": "interval", "attr": 0, "lo": "0", "hi": "1", "lo_closed": True, "hi_closed": False}]}}
    f = set_from_json(obj)
    assert contains(f, Fact("U", (0.0,)), REAL)
    assert not contains(f, Fact("U", (1.0,)), REAL)
    assert contains(f, Fact("U", (0.1,)), REAL)


# -- brute-force oracle on a finite schema --------------------------------

TUPLES = list(itertools.product(range(4), range(4), ("lo", "mid", "hi")))
ORDER = {"lo": 0, "mid": 1, "hi": 2}


def expand(p) -> set:
    """Explicit tuple set denoted by a predicate over R(A, B, C)."""
    pos = {"A": 0, "B": 1, "C": 2}
    if isinstance(p, Const):
        return set(TUPLES) if p.value else set()
    if isinstance(p, And):
        out = set(TUPLES)
        for a in p.args:
            out &= expand(a)
        return out
    if isinstance(p, Or):
        out = set()
        for a in p.args:
            out |= expand(a)
        return out
    if isinstance(p, Not):
        return set(TUPLES) - expand(p.arg)
    if isinstance(p, Equals):
        return {t for t in TUPLES if t[pos[p.attr]] == p.value}
    if isinstance(p, InSet):
        return {t for t in TUPLES if t[pos[p.attr]] in p.values}
    if isinstance(p, Interval):
        i = pos[p.attr]
        key = (lambda v: ORDER[v]) if i == 2 else (lambda v: v)
        out = set()
        for t in TUPLES:
            x = key(t[i])
            ok = True
            if p.lo is not None:
                lo = key(p.lo)
                ok &= x > lo or (p.lo_closed and x == lo)
            if p.hi is not None:
                hi = key(p.hi)
                ok &= x < hi or (p.hi_closed and x == hi)
            if ok:
                out.add(t)
        return out
    if isinstance(p, PairEquals):
        return {t for t in TUPLES if t[pos[p.left]] == t[pos[p.right]]}
    if isinstance(p, PairLess):
        return {t for t in TUPLES if t[pos[p.left]] < t[pos[p.right]]}
    raise TypeError(p)


ints = st.integers(0, 3)
cats = st.sampled_from(["lo", "mid", "hi"])
atoms = st.one_of(
    st.builds(Equals, st.sampled_from("AB"), ints),
    st.builds(Equals, st.just("C"), cats),
    st.builds(InSet, st.sampled_from("AB"), st.frozensets(ints)),
    st.builds(Interval, st.sampled_from("AB"), st.none() | ints, st.none() | ints, st.booleans(), st.booleans()),
    st.builds(PairEquals, st.just("A"), st.just("B")),
    st.builds(PairLess, st.sampled_from("AB"), st.sampled_from("AB")),
)
preds = st.recursive(
    atoms | st.sampled_from([TRUE, FALSE]),
    lambda sub: st.one_of(
        st.builds(lambda xs: And(tuple(xs)), st.lists(sub, min_size=1, max_size=3)),
        st.builds(lambda xs: Or(tuple(xs)), st.lists(sub, min_size=1, max_size=3)),
        st.builds(Not, sub),
    ),
    max_leaves=6,
)


def _ok(p):
    try:
        bind(FactSetExpr.of("R", p), FIN)
        return True
    except BadRange:
        return False


@given(preds.filter(_ok))
def test_contains_matches_explicit_expansion(p):
    bound = bind(FactSetExpr.of("R", p), FIN)
    assert {t for t in TUPLES if bound.contains(Fact("R", t))} == expand(p)


@given(preds.filter(_ok), preds.filter(_ok))
def test_de_morgan(a, b):
    lhs = bind(FactSetExpr.of("R", Not(And((a, b)))), FIN)
    rhs = bind(FactSetExpr.of("R", Or((Not(a), Not(b)))), FIN)
    for t in TUPLES:
        f = Fact("R", t)
        assert lhs.contains(f) == rhs.contains(f)


@given(preds.filter(_ok), preds.filter(_ok))
@settings(max_examples=150)
def test_overlap_decision_matches_enumeration(a, b):
    w = intersects(FactSetExpr.of("R", a), FactSetExpr.of("R", b), FIN)
    both = expand(a) & expand(b)
    if both:
        assert w is not None and w.values in both
    else:
        assert w is None


def test_set_algebra():
    a = FactSetExpr.of("S", InSet("A", frozenset({0, 1})))
    b = FactSetExpr({"S": InSet("A", frozenset({1, 2}))}, default=TRUE)
    for v in range(4):
        f = Fact("S", (v,))
        assert contains(a.union(b), f, FIN) == (v in {0, 1, 2})
        assert contains(a.intersect(b), f, FIN) == (v == 1)
        assert contains(a.complement(), f, FIN) == (v in {2, 3})
    g = Fact("R", (0, 0, "lo"))
    assert contains(b, g, FIN) and not contains(a, g, FIN) and contains(a.complement(), g, FIN)


# -- continuous overlap -----------------------------------------------------


@pytest.mark.parametrize(
    "a, b, overlap",
    [
        (Interval("A", 0, 1, True, False), Interval("A", 1, 2), False),
        (Interval("A", 0, 1), Interval("A", 1, 2), True),
        (Interval("A", 0, 1, False, False), Interval("A", 0.9999999999, 2, False, True), True),
        (PairLess("A", "B"), PairLess("B", "A"), False),
        (PairLess("A", "B"), PairEquals("A", "B"), False),
        (And((PairLess("A", "B"), Interval("B", None, 0))), Interval("A", 0, None), False),
        (And((PairLess("A", "B"), Interval("B", None, 0))), Interval("A", -1e-300, None), True),
        (Not(Equals("A", 0.5)), Equals("A", 0.5), False),
        (Not(InSet("A", frozenset({0.5}))), Interval("A", 0.5, 0.5), False),
    ],
)
def test_real_overlap(a, b, overlap):
    w = intersects(FactSetExpr.of("R", a), FactSetExpr.of("R", b), REAL)
    assert (w is not None) == overlap
    if w is not None:
        assert contains(FactSetExpr.of("R", a), w, REAL) and contains(FactSetExpr.of("R", b), w, REAL)


def test_integer_overlap_uses_integer_gaps():
    s = Schema({"A": IntegerAll()}, {"S": ("A",)})
    a = FactSetExpr.of("S", Interval("A", 0.5, 1.5))
    assert intersects(a, FactSetExpr.of("S", Equals("A", 1)), s) == Fact("S", (1,))
    assert intersects(a, FactSetExpr.of("S", Not(Equals("A", 1))), s) is None


def test_json_round_trip():
    f = FactSetExpr(
        {
            "R": And((Interval("A", None, 2, True, False), Not(InSet("B", frozenset({1, 3}))), PairLess(0, 1))),
            "S": Or((Equals("A", 1), Const(False))),
        },
        default=TRUE,
    )
    back = set_from_json(json.loads(json.dumps(set_to_json(f))))
    for t in TUPLES:
        assert contains(back, Fact("R", t), FIN) == contains(f, Fact("R", t), FIN)
    assert back == f


def test_text_predicates_in_json():
    assert pred_from_json("A in [1, 2) and not B = 3") == And(
        (Interval("A", 1, 2, True, False), Not(Equals("B", 3)))
    )
