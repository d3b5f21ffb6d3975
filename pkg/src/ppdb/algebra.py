"""Bag relational algebra (unnested) over :class:`BagInstance`.

Every query node produces a single output relation.  ``infer`` computes the
output schema (raising :class:`TypeMismatch` when a prerequisite fails) and
``run`` evaluates the node eagerly on one instance.  The multiplicity rules:

=================  ==========================================================
node               multiplicity of an output fact
=================  ==========================================================
EmptyConst         0 everywhere
SingletonConst     1 at the given fact
Extract(R)         #D(R(t))
Rename             #D(R(t)) under the renamed type
AdditiveUnion      #D(R1(t)) + #D(R2(t))
Difference         max(0, #D(R1(t)) - #D(R2(t)))
MinIntersect       min(#D(R1(t)), #D(R2(t)))
MaxUnion           max(#D(R1(t)), #D(R2(t)))
Dedup              1 if #D(f) > 0 else 0
Select(p)          #D(f) if f satisfies p else 0
Project(A1..Ak)    sum of #D(f) over facts f agreeing on A1..Ak
CrossProduct       #D(R1(t1)) * #D(R2(t2))
NaturalJoin        #D(R1(t|type R1)) * #D(R2(t|type R2))
=================  ==========================================================
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import TypeMismatch, UnknownRelation
from .instances import BagInstance, Fact, check_multiplicity
from .schema import Categorical, IntegerAll, RealInterval, Schema, is_int_value
from .sets import Pred, bind_pred, compile_pred


def output_relation(schema: Schema) -> str:
    (name,) = schema.relations
    return name


def _single(schema: Schema) -> tuple[str, tuple[str, ...], tuple]:
    name = output_relation(schema)
    return name, schema.type_of(name), schema.domains_of(name)


def _out(name: str, typ: Sequence[str], doms: Sequence) -> Schema:
    return Schema(dict(zip(typ, doms)), {name: tuple(typ)})


class Query:
    """Base class for query nodes."""

    def infer(self, schema: Schema) -> Schema:
        raise NotImplementedError

    def run(self, instance: BagInstance) -> BagInstance:
        raise NotImplementedError

    def children(self) -> tuple["Query", ...]:
        return ()

    # combinators, so queries can be built as ``R1.uplus(R2).dedup()``
    def uplus(self, other: "Query") -> "AdditiveUnion":
        return AdditiveUnion(self, other)

    def minus(self, other: "Query") -> "Difference":
        return Difference(self, other)

    def minint(self, other: "Query") -> "MinIntersect":
        return MinIntersect(self, other)

    def maxun(self, other: "Query") -> "MaxUnion":
        return MaxUnion(self, other)

    def cross(self, other: "Query") -> "CrossProduct":
        return CrossProduct(self, other)

    def join(self, other: "Query") -> "NaturalJoin":
        return NaturalJoin(self, other)

    def dedup(self) -> "Dedup":
        return Dedup(self)

    def select(self, pred: Pred) -> "Select":
        return Select(self, pred)

    def project(self, *attrs: str) -> "Project":
        return Project(self, tuple(attrs))

    def rename(self, old: str, new: str) -> "Rename":
        return Rename(self, old, new)

    def named(self, name: str) -> "As":
        return As(self, name)


# -- base queries ----------------------------------------------------------


@dataclass(frozen=True)
class EmptyConst(Query):
    """The empty bag, typed like ``relation`` (or nullary when omitted)."""

    relation: str | None = None

    def infer(self, schema):
        if self.relation is None:
            return Schema({}, {"Empty": ()})
        return schema.restrict([self.relation])

    def run(self, instance):
        return BagInstance.empty(self.infer(instance.schema))

    def __str__(self):
        return "empty" if self.relation is None else f"empty {self.relation}"


def _literal_domain(v):
    if is_int_value(v):
        return IntegerAll()
    if isinstance(v, float):
        return RealInterval()
    if isinstance(v, str):
        return Categorical((v,))
    raise TypeMismatch(f"unsupported constant {v!r}")


@dataclass(frozen=True)
class SingletonConst(Query):
    relation: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def infer(self, schema):
        if self.relation in schema.relations:
            out = schema.restrict([self.relation])
            doms = out.domains_of(self.relation)
            if len(doms) != len(self.values) or not all(d.contains(v) for d, v in zip(doms, self.values)):
                raise TypeMismatch(f"{self} is not a fact of {self.relation}{out.type_of(self.relation)}")
            return out
        typ = [f"{self.relation}_{i + 1}" for i in range(len(self.values))]
        return _out(self.relation, typ, [_literal_domain(v) for v in self.values])

    def run(self, instance):
        out = self.infer(instance.schema)
        doms = out.domains_of(self.relation)
        f = Fact(self.relation, tuple(d.normalize(v) for d, v in zip(doms, self.values)))
        return BagInstance(out, {f: 1}, trusted=True)

    def __str__(self):
        return f"one {self.relation}({', '.join(_lit(v) for v in self.values)})"


def _lit(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(v)


@dataclass(frozen=True)
class Extract(Query):
    relation: str

    def infer(self, schema):
        if self.relation not in schema.relations:
            raise UnknownRelation(f"unknown relation {self.relation!r}")
        return schema.restrict([self.relation])

    def run(self, instance):
        out = self.infer(instance.schema)
        return BagInstance(out, dict(instance.relation(self.relation)), trusted=True)

    def __str__(self):
        return self.relation


# -- unary operators -------------------------------------------------------


@dataclass(frozen=True)
class Rename(Query):
    child: Query
    old: str
    new: str

    def children(self):
        return (self.child,)

    def infer(self, schema):
        name, typ, doms = _single(self.child.infer(schema))
        return self._out(name, typ, doms)

    def _out(self, name, typ, doms):
        if self.old not in typ:
            raise TypeMismatch(f"rename: {self.old!r} does not appear in the type {typ} of {name}")
        if self.new in typ:
            raise TypeMismatch(f"rename: {self.new!r} already appears in the type {typ} of {name}")
        if self.new == name:
            raise TypeMismatch(f"rename: {self.new!r} clashes with the relation name")
        return _out(name, [self.new if a == self.old else a for a in typ], doms)

    def run(self, instance):
        c = self.child.run(instance)
        out = self._out(*_single(c.schema))
        return BagInstance(out, dict(c.items()), trusted=True)

    def __str__(self):
        return f"rename({self.child}, {self.old} -> {self.new})"


@dataclass(frozen=True)
class Dedup(Query):
    child: Query

    def children(self):
        return (self.child,)

    def infer(self, schema):
        return self.child.infer(schema)

    def run(self, instance):
        c = self.child.run(instance)
        return BagInstance(c.schema, {f: 1 for f, m in c.items() if m > 0}, trusted=True)

    def __str__(self):
        return f"dedup({self.child})"


@dataclass(frozen=True)
class Select(Query):
    child: Query
    pred: Pred

    def children(self):
        return (self.child,)

    def infer(self, schema):
        out = self.child.infer(schema)
        bind_pred(self.pred, out, output_relation(out))
        return out

    def run(self, instance):
        c = self.child.run(instance)
        name = output_relation(c.schema)
        test = compile_pred(bind_pred(self.pred, c.schema, name), c.schema.domains_of(name))
        return BagInstance(c.schema, {f: m for f, m in c.items() if test(f.values)}, trusted=True)

    def __str__(self):
        from .parsing import format_pred

        return f"select({self.child}, {format_pred(self.pred)})"


@dataclass(frozen=True)
class Project(Query):
    """Projection onto ``attrs`` in the given order (also covers reordering)."""

    child: Query
    attrs: tuple

    def __post_init__(self):
        object.__setattr__(self, "attrs", tuple(self.attrs))

    def children(self):
        return (self.child,)

    def infer(self, schema):
        return self._out(*_single(self.child.infer(schema)))

    def _out(self, name, typ, doms):
        if len(set(self.attrs)) != len(self.attrs):
            raise TypeMismatch(f"project: attributes {self.attrs} are not mutually distinct")
        missing = [a for a in self.attrs if a not in typ]
        if missing:
            raise TypeMismatch(f"project: {missing} not in the type {typ} of {name}")
        return _out(name, self.attrs, [doms[typ.index(a)] for a in self.attrs])

    def run(self, instance):
        c = self.child.run(instance)
        name, typ, doms = _single(c.schema)
        out = self._out(name, typ, doms)
        idx = [typ.index(a) for a in self.attrs]
        acc: Counter = Counter()
        for f, m in c.items():
            acc[Fact(name, tuple(f.values[i] for i in idx))] += m
        for m in acc.values():
            check_multiplicity(m)
        return BagInstance(out, acc, trusted=True)

    def __str__(self):
        return f"project({', '.join([str(self.child), *self.attrs])})"


@dataclass(frozen=True)
class As(Query):
    """Give the output relation a new name (used to assemble views)."""

    child: Query
    name: str

    def children(self):
        return (self.child,)

    def infer(self, schema):
        _, typ, doms = _single(self.child.infer(schema))
        return self._out(typ, doms)

    def _out(self, typ, doms):
        if self.name in typ:
            raise TypeMismatch(f"relation name {self.name!r} clashes with an attribute")
        return _out(self.name, typ, doms)

    def run(self, instance):
        c = self.child.run(instance)
        _, typ, doms = _single(c.schema)
        out = self._out(typ, doms)
        return BagInstance(out, {Fact(self.name, f.values): m for f, m in c.items()}, trusted=True)

    def __str__(self):
        return f"({self.child}) as {self.name}"


# -- binary operators ------------------------------------------------------


class _Binary(Query):
    left: Query
    right: Query
    keyword = ""

    def children(self):
        return (self.left, self.right)

    def infer(self, schema):
        return self._out(self.left.infer(schema), self.right.infer(schema))

    def run(self, instance):
        a, b = self.left.run(instance), self.right.run(instance)
        out = self._out(a.schema, b.schema)
        return BagInstance(out, self._combine(a, b, out), trusted=True)

    def __str__(self):
        return f"({self.left} {self.keyword} {self.right})"


class _SameType(_Binary):
    """Union-family operators: both inputs must have the same type."""

    def _out(self, ls, rs):
        ln, lt, ld = _single(ls)
        rn, rt, rd = _single(rs)
        if lt != rt or ld != rd:
            raise TypeMismatch(
                f"{type(self).__name__}: inputs must be of the same type, got {ln}{lt} and {rn}{rt}"
            )
        return _out(ln, lt, ld)

    def _combine(self, a, b, out):
        name = output_relation(out)
        ca = {f.values: m for f, m in a.items()}
        cb = {f.values: m for f, m in b.items()}
        res = {}
        for t in ca.keys() | cb.keys():
            m = self.rule(ca.get(t, 0), cb.get(t, 0))
            if m > 0:
                res[Fact(name, t)] = check_multiplicity(m)
        return res


@dataclass(frozen=True)
class AdditiveUnion(_SameType):
    left: Query
    right: Query
    keyword = "uplus"

    @staticmethod
    def rule(a, b):
        return a + b


@dataclass(frozen=True)
class Difference(_SameType):
    left: Query
    right: Query
    keyword = "minus"

    @staticmethod
    def rule(a, b):
        return max(0, a - b)


@dataclass(frozen=True)
class MinIntersect(_SameType):
    left: Query
    right: Query
    keyword = "minint"

    @staticmethod
    def rule(a, b):
        return min(a, b)


@dataclass(frozen=True)
class MaxUnion(_SameType):
    left: Query
    right: Query
    keyword = "maxun"

    @staticmethod
    def rule(a, b):
        return max(a, b)


@dataclass(frozen=True)
class CrossProduct(_Binary):
    left: Query
    right: Query
    keyword = "x"

    def _out(self, ls, rs):
        ln, lt, ld = _single(ls)
        _, rt, rd = _single(rs)
        shared = set(lt) & set(rt)
        if shared:
            raise TypeMismatch(f"cross product: attribute names {sorted(shared)} occur on both sides")
        return _out(ln, lt + rt, ld + rd)

    def _combine(self, a, b, out):
        name = output_relation(out)
        res = {}
        for f, m in a.items():
            for g, n in b.items():
                res[Fact(name, f.values + g.values)] = check_multiplicity(m * n)
        return res


@dataclass(frozen=True)
class NaturalJoin(_Binary):
    left: Query
    right: Query
    keyword = "join"

    def _out(self, ls, rs):
        ln, lt, ld = _single(ls)
        _, rt, rd = _single(rs)
        for i, a in enumerate(rt):
            if a in lt and ld[lt.index(a)] != rd[i]:
                raise TypeMismatch(f"join: shared attribute {a!r} has different domains on each side")
        extra = [i for i, a in enumerate(rt) if a not in lt]
        return _out(ln, lt + tuple(rt[i] for i in extra), ld + tuple(rd[i] for i in extra))

    def _combine(self, a, b, out):
        name, typ, _ = _single(out)
        lt = a.schema.type_of(output_relation(a.schema))
        rt = b.schema.type_of(output_relation(b.schema))
        shared = [a_ for a_ in rt if a_ in lt]
        lkey = [lt.index(x) for x in shared]
        rkey = [rt.index(x) for x in shared]
        extra = [i for i, x in enumerate(rt) if x not in lt]
        index = defaultdict(list)
        for g, n in b.items():
            index[tuple(g.values[i] for i in rkey)].append((g, n))
        res = {}
        for f, m in a.items():
            for g, n in index.get(tuple(f.values[i] for i in lkey), ()):
                t = f.values + tuple(g.values[i] for i in extra)
                res[Fact(name, t)] = check_multiplicity(m * n)
        return res


# -- views -----------------------------------------------------------------


@dataclass(frozen=True)
class View:
    """Finitely many queries with mutually distinct output relation names."""

    queries: tuple

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))

    def infer(self, schema: Schema) -> Schema:
        out = Schema({}, {})
        for q in self.queries:
            s = q.infer(schema)
            name = output_relation(s)
            if name in out.relations:
                raise TypeMismatch(f"view: output relation {name!r} produced by two queries")
            try:
                out = out.merge(s)
            except Exception as exc:
                raise TypeMismatch(f"view: {exc}") from None
        return out

    def run(self, instance: BagInstance) -> BagInstance:
        out = self.infer(instance.schema)
        counts = {}
        for q in self.queries:
            counts.update(q.run(instance).items())
        return BagInstance(out, counts, trusted=True)

    def __str__(self):
        return "; ".join(str(q) for q in self.queries)


def infer_schema(query: Query | View | None, schema: Schema) -> Schema:
    if query is None:
        return schema
    return query.infer(schema)


def evaluate(query: Query | View | None, instance: BagInstance) -> BagInstance:
    """Evaluate a query, a view, or the identity (``None``) on one instance."""
    if query is None:
        return instance
    return query.run(instance)


def eval_view(view: View, instance: BagInstance) -> BagInstance:
    return view.run(instance)


def walk(query: Query) -> Iterable[Query]:
    yield query
    for c in query.children():
        yield from walk(c)
