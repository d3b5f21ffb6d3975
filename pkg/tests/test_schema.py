from __future__ import annotations

import itertools
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppdb.errors import SchemaError, UnknownRelation
from ppdb.schema import (
    Categorical,
    IntegerAll,
    IntegerRange,
    RealInterval,
    Schema,
    domain_from_json,
    fact_in_domain,
    load_schema,
    schema_from_json,
    validate_schema,
)


def codes(schema):
    return sorted(v.code for v in validate_schema(schema))


def test_duplicate_attribute_in_type():
    s = Schema({"A": IntegerRange(0, 9)}, {"R": ("A", "A")})
    assert codes(s) == ["DuplicateAttributeInType"]


def test_valid_schema():
    s = Schema({"A": IntegerRange(0, 9), "B": Categorical(("x", "y"))}, {"R": ("A", "B")})
    assert validate_schema(s) == []
    assert s.validated() is s
    assert s.arity("R") == 2


def test_unknown_attribute():
    assert codes(Schema({}, {"R": ("A",)})) == ["UnknownAttribute"]


def test_all_violations_reported():
    s = Schema(
        {"A": IntegerRange(5, 1), "B": Categorical(()), "R": IntegerAll(), "C": RealInterval(2.0, 1.0)},
        {"R": ("A", "A", "Z")},
    )
    assert codes(s) == ["BadRange", "BadRange", "DuplicateAttributeInType", "EmptyCategorical", "NameClash", "UnknownAttribute"]
    with pytest.raises(SchemaError) as e:
        s.validated()
    assert len(e.value.violations) == 6


def test_duplicate_category():
    assert codes(Schema({"A": Categorical(("x", "x"))}, {})) == ["DuplicateCategory"]


def test_fact_in_domain_examples():
    s = Schema({"A": IntegerRange(0, 9)}, {"R": ("A",)})
    assert fact_in_domain(s, "R", [5])
    assert not fact_in_domain(s, "R", [12])
    assert not fact_in_domain(s, "R", [5, 5])
    s2 = Schema({"A": RealInterval(0, 1), "B": Categorical(("x",))}, {"R": ("A", "B")})
    assert fact_in_domain(s2, "R", [0.5, "x"])
    with pytest.raises(UnknownRelation):
        fact_in_domain(s, "S", [1])


def test_value_admissibility_edges():
    r = RealInterval(0, 1)
    assert r.contains(0) and r.contains(1.0) and not r.contains(1.0000001)
    assert not r.contains(math.nan) and not RealInterval().contains(math.inf)
    assert not IntegerAll().contains(True) and not IntegerAll().contains(1.0)
    assert not Categorical(("x",)).contains(1)
    assert RealInterval().normalize(-0.0) == 0.0 and math.copysign(1, RealInterval().normalize(-0.0)) == 1
    assert not RealInterval().contains(10**400)


SMALL = {
    "A": IntegerRange(0, 3),
    "B": Categorical(("x", "y", "z")),
    "C": RealInterval(0.0, 1.0),
}


def test_fact_in_domain_is_product_of_componentwise_checks():
    s = Schema(SMALL, {"R": ("A", "B", "C")})
    candidates = {
        "A": [-1, 0, 3, 4, "x", 1.5],
        "B": ["x", "z", "w", 0],
        "C": [0.0, 1.0, 0.5, -0.1, 1.1, "x", 1],
    }
    for vals in itertools.product(*candidates.values()):
        expected = all(SMALL[a].contains(v) for a, v in zip("ABC", vals))
        assert fact_in_domain(s, "R", list(vals)) == expected


def test_json_round_trip(tmp_path):
    obj = {
        "attributes": {
            "A": {"kind": "int_range", "lo": 0, "hi": 9},
            "B": {"kind": "real_interval", "lo": "-inf", "hi": "inf"},
            "C": {"kind": "categorical", "values": ["x", "y"]},
            "D": {"kind": "int_all"},
        },
        "relations": {"R": ["A", "B"], "S": ["C", "D"]},
    }
    s = schema_from_json(obj)
    assert s.attributes["B"] == RealInterval()
    assert schema_from_json(json.loads(json.dumps(s.to_json()))) == s
    p = tmp_path / "s.json"
    p.write_text(json.dumps(obj))
    assert load_schema(p) == s
    with pytest.raises(SchemaError):
        domain_from_json({"kind": "complex"})


def test_merge_and_restrict():
    a = Schema({"A": IntegerRange(0, 1)}, {"R": ("A",)})
    b = Schema({"B": IntegerAll()}, {"S": ("B",)})
    m = a.merge(b)
    assert set(m.relations) == {"R", "S"}
    assert m.restrict(["S"]) == b
    with pytest.raises(SchemaError):
        a.merge(Schema({"A": IntegerAll()}, {}))


@st.composite
def schemas(draw):
    names = draw(st.lists(st.sampled_from("ABCDERST"), min_size=0, max_size=5, unique=True))
    attrs = {n: IntegerRange(draw(st.integers(-3, 3)), draw(st.integers(-3, 3))) for n in names}
    rels = {}
    for r in draw(st.lists(st.sampled_from("RSTUV"), max_size=3, unique=True)):
        rels[r] = tuple(draw(st.lists(st.sampled_from("ABCDEX"), max_size=3)))
    return Schema(attrs, rels)


@given(schemas())
def test_validate_is_idempotent_and_pure(s):
    before = (dict(s.attributes), dict(s.relations))
    first = validate_schema(s)
    assert validate_schema(s) == first
    assert (dict(s.attributes), dict(s.relations)) == before
