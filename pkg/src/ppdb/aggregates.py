"""Aggregate operators and aggregation queries.

An :class:`Aggregator` is a commutative-monoid fold: values are lifted into
the monoid, merged, and the final accumulator is turned into the result.
Folding always runs over the canonical (sorted) sequence of the bag and
multiplicities are applied by repeated squaring of the lifted value, so
results never depend on insertion order.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

from .algebra import Query, _out, _single
from .errors import EmptyBagUndefined, TypeMismatch
from .instances import MAX_MULTIPLICITY, BagInstance, Fact
from .schema import INT, REAL, STR, AttributeDomain, IntegerAll, IntegerRange, RealInterval

_EMPTY = object()


@dataclass(frozen=True)
class Aggregator:
    """A symmetric map from finite bags of values to a value.

    ``identity``/``merge`` form the commutative monoid; ``lift`` embeds one
    value; ``finalize`` maps the accumulator to the result and raises
    :class:`EmptyBagUndefined` where the empty bag has no value.
    """

    name: str
    kinds: frozenset
    identity: Any
    lift: Callable[[Any, AttributeDomain], Any]
    merge: Callable[[Any, Any], Any]
    finalize: Callable[[Any, AttributeDomain], Any]
    output_domain: Callable[[AttributeDomain], AttributeDomain]


def _power(agg: Aggregator, x, m: int):
    """``x`` merged with itself ``m`` times."""
    result = agg.identity
    while m:
        if m & 1:
            result = agg.merge(result, x)
        m >>= 1
        if m:
            x = agg.merge(x, x)
    return result


def _as_counter(bag) -> Counter:
    if isinstance(bag, Counter):
        return bag
    if isinstance(bag, Mapping):
        return Counter(bag)
    return Counter(bag)


def fold(agg: Aggregator, bag, domain: AttributeDomain):
    acc = agg.identity
    counts = _as_counter(bag)
    for v in sorted(counts, key=domain.sort_key):
        m = counts[v]
        if m:
            acc = agg.merge(acc, _power(agg, agg.lift(v, domain), m))
    return acc


def apply(agg: Aggregator, bag, domain: AttributeDomain | None = None):
    """Value of ``agg`` on a bag given as an iterable of values or a value→count map."""
    counts = _as_counter(bag)
    if domain is None:
        domain = _guess_domain(counts)
    if domain.kind not in agg.kinds:
        raise TypeMismatch(f"{agg.name} does not accept {domain.kind} values")
    for v in counts:
        if not domain.contains(v):
            raise TypeMismatch(f"{agg.name}: {v!r} is not in {domain}")
    return agg.finalize(fold(agg, counts, domain), domain)


def _guess_domain(counts) -> AttributeDomain:
    from .schema import Categorical, is_int_value

    vals = list(counts)
    if all(is_int_value(v) for v in vals):
        return IntegerAll()
    if all(isinstance(v, str) for v in vals):
        return Categorical(tuple(sorted(vals)))
    return RealInterval()


# -- built-ins -------------------------------------------------------------


def _sum_final(acc, dom):
    return int(acc) if dom.kind == INT else float(acc)


def _extreme(pick):
    def merge(a, b):
        if a is _EMPTY:
            return b
        if b is _EMPTY:
            return a
        return pick(a, b, key=lambda kv: kv[0])

    return merge


def _extreme_final(acc, dom):
    if acc is _EMPTY:
        raise EmptyBagUndefined("MIN/MAX of the empty bag is undefined")
    return acc[1]


def _avg_final(acc, dom):
    total, n = acc
    if n == 0:
        raise EmptyBagUndefined("AVG of the empty bag is undefined")
    return float(total / n)


def _avg_domain(dom):
    if isinstance(dom, (IntegerRange, RealInterval)):
        return RealInterval(float(dom.lo), float(dom.hi))
    return RealInterval()


_COUNT_DOMAIN = IntegerRange(0, MAX_MULTIPLICITY)
_NUMERIC = frozenset({INT, REAL})
_ANY = frozenset({INT, REAL, STR})

CNT = Aggregator(
    "CNT", _ANY, 0, lambda v, d: 1, lambda a, b: a + b, lambda acc, d: acc, lambda d: _COUNT_DOMAIN
)
CNTD = Aggregator(
    "CNTd",
    _ANY,
    frozenset(),
    lambda v, d: frozenset((v,)),
    lambda a, b: a | b,
    lambda acc, d: len(acc),
    lambda d: _COUNT_DOMAIN,
)
SUM = Aggregator(
    "SUM",
    _NUMERIC,
    Fraction(0),
    lambda v, d: Fraction(v),
    lambda a, b: a + b,
    _sum_final,
    lambda d: IntegerAll() if d.kind == INT else RealInterval(),
)
MIN = Aggregator(
    "MIN", _ANY, _EMPTY, lambda v, d: (d.sort_key(v), v), _extreme(min), _extreme_final, lambda d: d
)
MAX = Aggregator(
    "MAX", _ANY, _EMPTY, lambda v, d: (d.sort_key(v), v), _extreme(max), _extreme_final, lambda d: d
)
AVG = Aggregator(
    "AVG",
    _NUMERIC,
    (Fraction(0), 0),
    lambda v, d: (Fraction(v), 1),
    lambda a, b: (a[0] + b[0], a[1] + b[1]),
    _avg_final,
    _avg_domain,
)

REGISTRY: dict[str, Aggregator] = {a.name.upper(): a for a in (CNT, CNTD, SUM, MIN, MAX, AVG)}


def get_aggregator(name: str) -> Aggregator:
    try:
        return REGISTRY[name.upper()]
    except KeyError:
        raise TypeMismatch(f"unknown aggregator {name!r}") from None


def register_aggregator(agg: Aggregator, samples: Iterable[Any], domain: AttributeDomain, trials: int = 50) -> None:
    """Add a custom aggregator after checking its monoid laws and symmetry.

    ``samples`` are values of ``domain`` used to exercise the laws: identity,
    commutativity and associativity of ``merge`` on lifted samples, and
    invariance of a plain left fold under random reorderings.
    """
    vals = list(samples)
    if not vals:
        raise ValueError("need sample values to check the aggregator")
    lifted = [agg.lift(v, domain) for v in vals]
    for x in lifted:
        if agg.merge(agg.identity, x) != x or agg.merge(x, agg.identity) != x:
            raise ValueError(f"{agg.name}: identity law fails")
    for x, y in itertools.product(lifted, repeat=2):
        if agg.merge(x, y) != agg.merge(y, x):
            raise ValueError(f"{agg.name}: merge is not commutative")
    for x, y, z in itertools.islice(itertools.product(lifted, repeat=3), 1000):
        if agg.merge(agg.merge(x, y), z) != agg.merge(x, agg.merge(y, z)):
            raise ValueError(f"{agg.name}: merge is not associative")
    rng = random.Random(0)
    base = _left_fold(agg, vals, domain)
    for _ in range(trials):
        perm = vals[:]
        rng.shuffle(perm)
        if _left_fold(agg, perm, domain) != base:
            raise ValueError(f"{agg.name}: result depends on element order")
    REGISTRY[agg.name.upper()] = agg


def _left_fold(agg, seq, domain):
    acc = agg.identity
    for v in seq:
        acc = agg.merge(acc, agg.lift(v, domain))
    try:
        return agg.finalize(acc, domain)
    except EmptyBagUndefined:
        return _EMPTY


# -- queries ---------------------------------------------------------------


def _agg_attr_name(agg: Aggregator, attr: str, taken) -> str:
    base = f"{agg.name.lower()}_{attr}"
    name, i = base, 1
    while name in taken:
        i += 1
        name = f"{base}{i}"
    return name


@dataclass(frozen=True)
class Aggregate(Query):
    """Aggregation of ``attr`` over the child's output.

    With ``group`` = ``None`` this is the plain aggregation query: it always
    returns exactly one fact, and MIN/MAX/AVG of an empty input raise.  With a
    tuple of grouping attributes (possibly empty) it returns one fact per
    distinct group key present in the input.
    """

    child: Query
    agg: str
    attr: str
    group: tuple | None = None

    def __post_init__(self):
        if self.group is not None:
            object.__setattr__(self, "group", tuple(self.group))

    def children(self):
        return (self.child,)

    def infer(self, schema):
        return self._out(*_single(self.child.infer(schema)))

    def _out(self, name, typ, doms):
        agg = get_aggregator(self.agg)
        keys = self.group or ()
        if len(set(keys)) != len(keys):
            raise TypeMismatch(f"aggregate: grouping attributes {keys} are not distinct")
        for a in (*keys, self.attr):
            if a not in typ:
                raise TypeMismatch(f"aggregate: {a!r} not in the type {typ} of {name}")
        dom = doms[typ.index(self.attr)]
        if dom.kind not in agg.kinds:
            raise TypeMismatch(f"{agg.name} cannot aggregate {dom.kind} attribute {self.attr!r}")
        out_attr = _agg_attr_name(agg, self.attr, set(keys) | {name})
        return _out(name, (*keys, out_attr), (*(doms[typ.index(k)] for k in keys), agg.output_domain(dom)))

    def run(self, instance):
        c = self.child.run(instance)
        name, typ, doms = _single(c.schema)
        out = self._out(name, typ, doms)
        agg = get_aggregator(self.agg)
        vi = typ.index(self.attr)
        dom = doms[vi]
        if self.group is None:
            bag: Counter = Counter()
            for f, m in c.items():
                bag[f.values[vi]] += m
            v = agg.finalize(fold(agg, bag, dom), dom)
            return BagInstance(out, {Fact(name, (v,)): 1}, trusted=True)
        ki = [typ.index(k) for k in self.group]
        groups: dict[tuple, Counter] = {}
        for f, m in c.items():
            groups.setdefault(tuple(f.values[i] for i in ki), Counter())[f.values[vi]] += m
        res = {}
        for key, bag in groups.items():
            v = agg.finalize(fold(agg, bag, dom), dom)
            res[Fact(name, key + (v,))] = 1
        return BagInstance(out, res, trusted=True)

    def __str__(self):
        call = f"{self.agg}({self.attr})"
        if self.group is not None:
            call = "group " + "".join(f"{g}, " for g in self.group) + call
        return f"agg({self.child}, {call})"


def aggregate_query(relation: str, agg: Aggregator | str, instance: BagInstance, attr: str | None = None) -> BagInstance:
    """Plain aggregation ϖ over one attribute of ``relation`` (its only one by default)."""
    from .algebra import Extract

    name = agg.name if isinstance(agg, Aggregator) else agg
    typ = instance.schema.type_of(relation)
    if attr is None:
        if len(typ) != 1:
            raise TypeMismatch(f"{relation} is not unary; name the attribute to aggregate")
        attr = typ[0]
    return Aggregate(Extract(relation), name, attr).run(instance)


def group_aggregate(
    relation: str, group_attrs, agg: Aggregator | str, agg_attr: str, instance: BagInstance
) -> BagInstance:
    from .algebra import Extract

    name = agg.name if isinstance(agg, Aggregator) else agg
    return Aggregate(Extract(relation), name, agg_attr, tuple(group_attrs)).run(instance)
