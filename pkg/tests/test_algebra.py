from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from ppdb.algebra import (
    AdditiveUnion,
    CrossProduct,
    Dedup,
    Difference,
    EmptyConst,
    Extract,
    MaxUnion,
    MinIntersect,
    NaturalJoin,
    Project,
    Rename,
    Select,
    SingletonConst,
    View,
    evaluate,
    infer_schema,
)
from ppdb.errors import MultiplicityOverflow, TypeMismatch, UnknownRelation
from ppdb.instances import MAX_MULTIPLICITY, BagInstance, Fact
from ppdb.schema import Categorical, IntegerRange, Schema
from ppdb.sets import And, Equals, Interval

R, S, T = Extract("R"), Extract("S"), Extract("T")


def inst(**rels):
    return O.to_instance({r: rels.get(r, {}) for r in O.TYPES})


def counts(result):
    return O.result_as_dict(result)


def test_union_difference_cross_examples():
    d = inst(R={(0, 1): 2}, S={(0, 1): 3}, T={(1, "p"): 3})
    assert counts(evaluate(R.uplus(S), d)) == {(0, 1): 5}
    assert counts(evaluate(R.minus(S), d)) == {}
    assert counts(evaluate(S.minus(R), d)) == {(0, 1): 1}
    assert counts(evaluate(R.minint(S), d)) == {(0, 1): 2}
    assert counts(evaluate(R.maxun(S), d)) == {(0, 1): 3}
    assert counts(evaluate(Extract("R").cross(Extract("U")), inst(R={(0, 1): 2}, U={("q", 1): 3}))) == {(0, 1, "q", 1): 6}
    assert counts(evaluate(R.dedup(), d)) == {(0, 1): 1}
    assert counts(evaluate(R.join(T), d)) == {(0, 1, "p"): 6}


def test_output_schema_of_binary_nodes():
    s = infer_schema(R.join(T), O.SCHEMA)
    assert s.relations == {"R": ("A", "B", "C")}
    s = infer_schema(R.rename("A", "X").cross(Extract("U")), O.SCHEMA)
    assert s.relations == {"R": ("X", "B", "C", "D")}
    assert infer_schema(R.uplus(S), O.SCHEMA).relations == {"R": ("A", "B")}


def test_project_reorders_and_sums():
    d = inst(T={(0, "p"): 2, (1, "p"): 3, (2, "q"): 1})
    assert counts(evaluate(T.project("C"), d)) == {("p",): 5, ("q",): 1}
    assert counts(evaluate(T.project("C", "B"), d)) == {("p", 0): 2, ("p", 1): 3, ("q", 2): 1}
    assert infer_schema(T.project("C", "B"), O.SCHEMA).relations == {"T": ("C", "B")}


def test_constants():
    d = inst()
    assert counts(evaluate(EmptyConst("R"), d)) == {}
    assert counts(evaluate(SingletonConst("R", (1, 2)), d)) == {(1, 2): 1}
    assert counts(evaluate(SingletonConst("Z", (1, "x")), d)) == {(1, "x"): 1}
    with pytest.raises(TypeMismatch):
        evaluate(SingletonConst("R", (1, 7)), d)


def test_type_errors():
    with pytest.raises(TypeMismatch):
        infer_schema(R.rename("A", "B"), O.SCHEMA)
    with pytest.raises(TypeMismatch):
        infer_schema(R.rename("Z", "Y"), O.SCHEMA)
    with pytest.raises(TypeMismatch):
        infer_schema(R.maxun(T), O.SCHEMA)
    with pytest.raises(TypeMismatch):
        infer_schema(R.cross(S), O.SCHEMA)
    with pytest.raises(TypeMismatch):
        infer_schema(R.project("A", "A"), O.SCHEMA)
    with pytest.raises(TypeMismatch):
        infer_schema(R.project("C"), O.SCHEMA)
    with pytest.raises(UnknownRelation):
        infer_schema(Extract("Q"), O.SCHEMA)
    mixed = Schema(
        {"A": IntegerRange(0, 2), "B": IntegerRange(0, 9), "C": Categorical(("p",))},
        {"R": ("A", "B"), "V": ("B", "C")},
    )
    with pytest.raises(TypeMismatch):
        infer_schema(R.rename("B", "X").rename("A", "B").join(Extract("V")), mixed)


def test_overflow_is_reported():
    s = Schema({"A": IntegerRange(0, 0)}, {"R": ("A",)})
    d = BagInstance(s, {Fact("R", (0,)): MAX_MULTIPLICITY})
    with pytest.raises(MultiplicityOverflow):
        evaluate(Extract("R").uplus(Extract("R")), d)


def test_views():
    d = inst(R={(0, 1): 2}, T={(1, "q"): 1})
    v = View((R.dedup(), T.named("W")))
    out = evaluate(v, d)
    assert set(out.schema.relations) == {"R", "W"}
    assert out.multiplicity(("R", (0, 1))) == 1 and out.multiplicity(("W", (1, "q"))) == 1
    assert evaluate(View(()), d).cardinality() == 0
    assert evaluate(View((R,)), d) == evaluate(R, d)
    with pytest.raises(TypeMismatch):
        infer_schema(View((R, R.dedup())), O.SCHEMA)


def test_identity_query():
    d = inst(R={(0, 1): 2})
    assert evaluate(None, d) is d


# -- properties -------------------------------------------------------------

worlds = st.builds(lambda seed: O.random_world(random.Random(seed)), st.integers(0, 2**32))


def eq(q1, q2, world):
    d = O.to_instance(world)
    return counts(evaluate(q1, d)) == counts(evaluate(q2, d))


@given(worlds)
def test_commutativity(w):
    for op in (AdditiveUnion, MinIntersect, MaxUnion):
        assert eq(op(R, S), op(S, R), w)


@given(worlds)
def test_associativity(w):
    U = Dedup(R)
    for op in (AdditiveUnion, MinIntersect, MaxUnion):
        assert eq(op(op(R, S), U), op(R, op(S, U)), w)


@given(worlds)
def test_idempotence_and_dedup(w):
    assert eq(MinIntersect(R, R), R, w)
    assert eq(MaxUnion(R, R), R, w)
    assert eq(Dedup(Dedup(R)), Dedup(R), w)
    assert eq(Difference(R, R), EmptyConst("R"), w)


preds = st.sampled_from([Equals("A", 1), Interval("B", None, 1), Interval("A", 1, 2, False, True), Equals("B", 0)])


@given(worlds, preds, preds)
def test_select_composition(w, p, q):
    assert eq(Select(Select(R, p), q), Select(R, And((p, q))), w)
    assert eq(Select(Select(R, p), q), Select(Select(R, q), p), w)
    assert eq(Select(Dedup(R), p), Dedup(Select(R, p)), w)


@given(worlds)
def test_projection_preserves_cardinality(w):
    d = O.to_instance(w)
    for attrs in (("A",), ("B",), ("B", "A")):
        assert evaluate(Project(R, attrs), d).cardinality() == evaluate(R, d).cardinality()


@given(worlds)
def test_rename_inverse(w):
    assert eq(Rename(Rename(T, "B", "Z"), "Z", "B"), T, w)


@given(worlds)
def test_join_with_disjoint_types_is_cross(w):
    assert eq(NaturalJoin(R, Extract("U")), CrossProduct(R, Extract("U")), w)


@given(st.integers(0, 2**32))
@settings(max_examples=200)
def test_random_queries_match_oracle(seed):
    rng = random.Random(seed)
    desc = O.random_query(rng, depth=3)
    w = O.random_world(rng)
    _, expected = O.oracle_eval(desc, w)
    assert counts(evaluate(O.build(desc), O.to_instance(w))) == expected
