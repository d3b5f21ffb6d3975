"""Database schemas in the named perspective.

A schema fixes a domain for every attribute and an ordered type (a tuple of
distinct attribute names) for every relation.  Four domain constructors are
available: all integers, an inclusive integer range, an inclusive real
interval (endpoints may be infinite) and a finite ordered list of categories.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple, Sequence, Union

from .errors import SchemaError, UnknownRelation

Value = Union[int, float, str]

INT = "int"
REAL = "real"
STR = "str"


def is_int_value(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def is_real_value(v: Any) -> bool:
    if is_int_value(v):
        return abs(v) < 2**1024  # representable as a finite float
    return isinstance(v, float) and math.isfinite(v)


@dataclass(frozen=True)
class IntegerAll:
    kind = INT

    def contains(self, v: Any) -> bool:
        return is_int_value(v)

    def normalize(self, v: Value) -> Value:
        return v

    def sort_key(self, v: Value):
        return v

    def parse(self, text: str) -> int:
        return int(text.strip())

    def to_json(self) -> dict:
        return {"kind": "int_all"}

    def is_finite(self) -> bool:
        return False


@dataclass(frozen=True)
class IntegerRange:
    lo: int
    hi: int
    kind = INT

    def contains(self, v: Any) -> bool:
        return is_int_value(v) and self.lo <= v <= self.hi

    def normalize(self, v: Value) -> Value:
        return v

    def sort_key(self, v: Value):
        return v

    def parse(self, text: str) -> int:
        return int(text.strip())

    def to_json(self) -> dict:
        return {"kind": "int_range", "lo": self.lo, "hi": self.hi}

    def is_finite(self) -> bool:
        return True

    def values(self) -> list[int]:
        return list(range(self.lo, self.hi + 1))


@dataclass(frozen=True)
class RealInterval:
    lo: float = -math.inf
    hi: float = math.inf
    kind = REAL

    def contains(self, v: Any) -> bool:
        return is_real_value(v) and self.lo <= v <= self.hi

    def normalize(self, v: Value) -> Value:
        # -0.0 and 0.0 denote the same real; keep a single representative
        return float(v) + 0.0

    def sort_key(self, v: Value):
        return v

    def parse(self, text: str) -> float:
        return float(text.strip())

    def to_json(self) -> dict:
        return {"kind": "real_interval", "lo": _dump_endpoint(self.lo), "hi": _dump_endpoint(self.hi)}

    def is_finite(self) -> bool:
        return False


@dataclass(frozen=True)
class Categorical:
    categories: tuple[str, ...]
    kind = STR
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.categories)})

    def contains(self, v: Any) -> bool:
        return isinstance(v, str) and v in self._index

    def normalize(self, v: Value) -> Value:
        return v

    def sort_key(self, v: Value):
        return self._index[v]

    def index(self, v: str) -> int:
        return self._index[v]

    def parse(self, text: str) -> str:
        return text

    def to_json(self) -> dict:
        return {"kind": "categorical", "values": list(self.categories)}

    def is_finite(self) -> bool:
        return True

    def values(self) -> list[str]:
        return list(self.categories)


AttributeDomain = Union[IntegerAll, IntegerRange, RealInterval, Categorical]


def _dump_endpoint(x: float):
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return x


def _load_endpoint(x) -> float:
    if isinstance(x, str):
        return float(x)
    return float(x)


def domain_from_json(obj: Mapping[str, Any]) -> AttributeDomain:
    kind = obj.get("kind")
    if kind == "int_all":
        return IntegerAll()
    if kind == "int_range":
        return IntegerRange(int(obj["lo"]), int(obj["hi"]))
    if kind == "real_interval":
        return RealInterval(_load_endpoint(obj.get("lo", "-inf")), _load_endpoint(obj.get("hi", "inf")))
    if kind == "categorical":
        return Categorical(tuple(obj["values"]))
    raise SchemaError([Violation("BadDomain", f"unknown domain kind {kind!r}")])


class Violation(NamedTuple):
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class Schema:
    """Attribute domains plus relation types.

    Construction does not validate; call :func:`validate_schema` or
    :meth:`validated` for that.
    """

    attributes: Mapping[str, AttributeDomain]
    relations: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(self, "attributes", dict(self.attributes))
        object.__setattr__(self, "relations", {r: tuple(t) for r, t in self.relations.items()})

    def type_of(self, relation: str) -> tuple[str, ...]:
        try:
            return self.relations[relation]
        except KeyError:
            raise UnknownRelation(f"unknown relation {relation!r}") from None

    def arity(self, relation: str) -> int:
        return len(self.type_of(relation))

    def domains_of(self, relation: str) -> tuple[AttributeDomain, ...]:
        return tuple(self.attributes[a] for a in self.type_of(relation))

    def validated(self) -> "Schema":
        problems = validate_schema(self)
        if problems:
            raise SchemaError(problems)
        return self

    def restrict(self, relations: Iterable[str]) -> "Schema":
        """Sub-schema keeping only ``relations`` and the attributes they use."""
        rels = {r: self.type_of(r) for r in relations}
        attrs = {a: self.attributes[a] for t in rels.values() for a in t}
        return Schema(attrs, rels)

    def merge(self, other: "Schema") -> "Schema":
        """Union of two schemas; shared names must agree."""
        attrs = dict(self.attributes)
        for a, d in other.attributes.items():
            if a in attrs and attrs[a] != d:
                raise SchemaError([Violation("DomainMismatch", f"attribute {a!r} has conflicting domains")])
            attrs[a] = d
        rels = dict(self.relations)
        for r, t in other.relations.items():
            if r in rels and rels[r] != t:
                raise SchemaError([Violation("NameClash", f"relation {r!r} declared twice with different types")])
            rels[r] = t
        return Schema(attrs, rels)

    def to_json(self) -> dict:
        return {
            "attributes": {a: d.to_json() for a, d in self.attributes.items()},
            "relations": {r: list(t) for r, t in self.relations.items()},
        }


def validate_schema(schema: Schema) -> list[Violation]:
    """Return every invariant violation of ``schema`` (empty list when valid)."""
    out: list[Violation] = []
    for a, dom in schema.attributes.items():
        if isinstance(dom, IntegerRange) and not dom.lo <= dom.hi:
            out.append(Violation("BadRange", f"attribute {a!r}: lo {dom.lo} > hi {dom.hi}"))
        elif isinstance(dom, RealInterval):
            if math.isnan(dom.lo) or math.isnan(dom.hi) or not dom.lo <= dom.hi:
                out.append(Violation("BadRange", f"attribute {a!r}: bad interval [{dom.lo}, {dom.hi}]"))
        elif isinstance(dom, Categorical):
            if not dom.categories:
                out.append(Violation("EmptyCategorical", f"attribute {a!r} has no categories"))
            elif len(set(dom.categories)) != len(dom.categories):
                out.append(Violation("DuplicateCategory", f"attribute {a!r} repeats a category"))
            elif not all(isinstance(v, str) for v in dom.categories):
                out.append(Violation("BadDomain", f"attribute {a!r}: categories must be strings"))
    for r in sorted(set(schema.attributes) & set(schema.relations)):
        out.append(Violation("NameClash", f"{r!r} is both an attribute and a relation"))
    for r, typ in schema.relations.items():
        seen = set()
        for a in typ:
            if a in seen:
                out.append(Violation("DuplicateAttributeInType", f"relation {r!r} repeats attribute {a!r}"))
            seen.add(a)
            if a not in schema.attributes:
                out.append(Violation("UnknownAttribute", f"relation {r!r} uses undeclared attribute {a!r}"))
    return out


def fact_in_domain(schema: Schema, relation: str, values: Sequence[Any]) -> bool:
    """Membership of ``relation(values)`` in the relation's fact space."""
    doms = schema.domains_of(relation)
    if len(values) != len(doms):
        return False
    return all(d.contains(v) for d, v in zip(doms, values))


def schema_from_json(obj: Mapping[str, Any]) -> Schema:
    attrs = {a: domain_from_json(d) for a, d in obj.get("attributes", {}).items()}
    rels = {r: tuple(t) for r, t in obj.get("relations", {}).items()}
    return Schema(attrs, rels).validated()


def load_schema(path: str | Path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return schema_from_json(json.load(fh))
