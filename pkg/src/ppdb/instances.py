"""Finite bag instances of a schema.

A :class:`BagInstance` stores the multiplicity function of a finite bag of
facts.  :func:`canonicalize` produces the sorted-sequence representative used
for equality, hashing and serialization.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, NamedTuple, Sequence

from .errors import MultiplicityOverflow, SchemaMismatch
from .schema import Schema, Value

MAX_MULTIPLICITY = 2**64 - 1


class Fact(NamedTuple):
    relation: str
    values: tuple

    def __str__(self) -> str:
        return f"{self.relation}({', '.join(_fmt(v) for v in self.values)})"


def _fmt(v: Value) -> str:
    return repr(v) if isinstance(v, str) else str(v)


def check_multiplicity(m: int) -> int:
    if m > MAX_MULTIPLICITY:
        raise MultiplicityOverflow(f"multiplicity {m} exceeds 2**64-1")
    return m


def make_fact(schema: Schema, relation: str, values: Sequence[Any]) -> Fact:
    """Build a fact, checking admissibility and normalizing numeric values."""
    doms = schema.domains_of(relation)
    if len(values) != len(doms):
        raise SchemaMismatch(f"{relation} expects {len(doms)} values, got {len(values)}")
    out = []
    for d, v in zip(doms, values):
        if not d.contains(v):
            raise SchemaMismatch(f"value {v!r} not admissible for {relation} ({d})")
        out.append(d.normalize(v))
    return Fact(relation, tuple(out))


class BagInstance:
    """Immutable finite bag of facts over ``schema``."""

    __slots__ = ("schema", "_counts", "_canon")

    def __init__(self, schema: Schema, counts: Mapping[Fact, int] | None = None, *, trusted: bool = False):
        self.schema = schema
        self._canon = None
        if trusted:
            self._counts = dict(counts or {})
            return
        data: dict[Fact, int] = {}
        for f, m in (counts or {}).items():
            if not isinstance(m, int) or m < 0:
                raise ValueError(f"bad multiplicity {m!r} for {f}")
            if m == 0:
                continue
            f = make_fact(schema, f[0], f[1])
            data[f] = check_multiplicity(data.get(f, 0) + m)
        self._counts = data

    @classmethod
    def from_facts(cls, schema: Schema, facts: Iterable[Fact | tuple]) -> "BagInstance":
        counts: Counter = Counter()
        for f in facts:
            counts[make_fact(schema, f[0], f[1])] += 1
        return cls(schema, counts, trusted=True)

    @classmethod
    def empty(cls, schema: Schema) -> "BagInstance":
        return cls(schema, {}, trusted=True)

    def multiplicity(self, fact: Fact | tuple) -> int:
        return self._counts.get(Fact(fact[0], tuple(fact[1])), 0)

    def items(self) -> Iterator[tuple[Fact, int]]:
        return iter(self._counts.items())

    def support(self) -> Iterator[Fact]:
        return iter(self._counts)

    def relation(self, name: str) -> Iterator[tuple[Fact, int]]:
        return ((f, m) for f, m in self._counts.items() if f.relation == name)

    def cardinality(self) -> int:
        return sum(self._counts.values())

    def __len__(self) -> int:
        return self.cardinality()

    def is_set(self) -> bool:
        return all(m == 1 for m in self._counts.values())

    def with_added(self, fact: Fact | tuple, m: int = 1) -> "BagInstance":
        f = make_fact(self.schema, fact[0], fact[1])
        counts = dict(self._counts)
        counts[f] = check_multiplicity(counts.get(f, 0) + m)
        return BagInstance(self.schema, counts, trusted=True)

    def with_removed(self, fact: Fact | tuple, m: int = 1) -> "BagInstance":
        f = Fact(fact[0], tuple(fact[1]))
        counts = dict(self._counts)
        left = counts.get(f, 0) - m
        if left > 0:
            counts[f] = left
        else:
            counts.pop(f, None)
        return BagInstance(self.schema, counts, trusted=True)

    def canonical(self) -> tuple:
        if self._canon is None:
            self._canon = tuple(canonicalize(self))
        return self._canon

    def __eq__(self, other) -> bool:
        if not isinstance(other, BagInstance):
            return NotImplemented
        return self._counts == other._counts

    def __hash__(self) -> int:
        return hash(self.canonical())

    def __repr__(self) -> str:
        body = ", ".join(f"{f}" if m == 1 else f"{f}×{m}" for f, m in self.canonical())
        return f"⦃{body}⦄"


def fact_sort_key(schema: Schema):
    """Total order on facts: relation name, then tuple order per domain."""
    cache: dict[str, tuple] = {}

    def key(f: Fact):
        doms = cache.get(f.relation)
        if doms is None:
            doms = cache[f.relation] = schema.domains_of(f.relation)
        return (f.relation, tuple(d.sort_key(v) for d, v in zip(doms, f.values)))

    return key


def canonicalize(instance: BagInstance) -> list[tuple[Fact, int]]:
    """Sorted ``(fact, multiplicity)`` pairs; equal bags give equal lists."""
    key = fact_sort_key(instance.schema)
    return sorted(instance.items(), key=lambda fm: key(fm[0]))


def multiplicity(instance: BagInstance, fact: Fact | tuple) -> int:
    return instance.multiplicity(fact)


def count_in_set(instance: BagInstance, fact_set) -> int:
    """Number of hits of ``instance`` inside the fact set (with multiplicity)."""
    from .sets import bind

    bound = bind(fact_set, instance.schema)
    return sum(m for f, m in instance.items() if bound.contains(f))


# -- serialization ---------------------------------------------------------


def instance_to_json(instance: BagInstance) -> list:
    return [[f.relation, list(f.values), m] for f, m in instance.canonical()]


def instance_from_json(schema: Schema, rows: Iterable[Sequence[Any]]) -> BagInstance:
    counts: Counter = Counter()
    for row in rows:
        rel, vals = row[0], row[1]
        m = int(row[2]) if len(row) > 2 else 1
        counts[make_fact(schema, rel, vals)] += m
    for m in counts.values():
        check_multiplicity(m)
    return BagInstance(schema, {f: m for f, m in counts.items() if m > 0}, trusted=True)


def read_jsonl(schema: Schema, path: str | Path) -> BagInstance:
    """Read ``["R", [v1, ...], count]`` rows, one per line (count optional)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return instance_from_json(schema, rows)


def read_csv(schema: Schema, relation: str, path: str | Path) -> BagInstance:
    """Each CSV row is one fact of ``relation``; repeated rows add up.

    A leading header equal to the relation's attribute names is skipped.
    """
    typ = schema.type_of(relation)
    doms = schema.domains_of(relation)
    counts: Counter = Counter()
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if lineno == 0 and tuple(c.strip() for c in row) == typ:
                continue
            if len(row) != len(doms):
                raise SchemaMismatch(f"{path}:{lineno + 1}: expected {len(doms)} columns, got {len(row)}")
            try:
                vals = [d.parse(c) for d, c in zip(doms, row)]
            except ValueError as exc:
                raise SchemaMismatch(f"{path}:{lineno + 1}: {exc}") from None
            counts[make_fact(schema, relation, vals)] += 1
    return BagInstance(schema, counts, trusted=True)


def union_all(schema: Schema, parts: Iterable[BagInstance]) -> BagInstance:
    counts: Counter = Counter()
    for p in parts:
        for f, m in p.items():
            counts[f] += m
    for m in counts.values():
        check_multiplicity(m)
    return BagInstance(schema, counts, trusted=True)
