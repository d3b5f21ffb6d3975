"""Probabilistic databases: finite PDBs with exact probabilities and seeded
finite point-process samplers.

Sampling procedure for :class:`PointProcessPdb` (fixed so realizations are
reproducible from ``(seed, index)`` alone):

* relation ordinal = position of the relation name in sorted order;
  each relation reads its own stream ``stream_key(seed, index, ordinal)``;
* draw 0 is the count; tuples follow, attribute by attribute;
* counts: ``Fixed`` uses no draw; ``Poisson`` (truncated at ``n_max`` and
  renormalized) and ``CountCategorical`` invert the CDF with one uniform;
* ``UniformInt``: bounded integer by modulo with rejection;
* ``CategoricalWeighted``: CDF inversion with one uniform;
* ``UniformReal``: ``lo + u * (hi - lo)``, clamped to ``hi``;
* ``Normal``: Box-Muller (cosine branch, two uniforms per try), rejected
  until it lands in the attribute interval; after ``NORMAL_MAX_TRIES`` tries
  the mean clamped into the interval is used.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import InvalidModel, PpdbError, SchemaMismatch
from .instances import BagInstance, Fact, count_in_set, instance_from_json, instance_to_json
from .rng import Stream, first_draws, stream_key
from .schema import INT, REAL, RealInterval, Schema, schema_from_json
from .sets import BoundSet, FactSetExpr, bind, set_from_json, set_to_json

NORMAL_MAX_TRIES = 10_000
NORMAL_MIN_MASS = 0.01


def _fraction(p: Any) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, bool):
        raise InvalidModel(f"bad probability {p!r}")
    if isinstance(p, (int, str)):
        try:
            return Fraction(p)
        except (ValueError, ZeroDivisionError):
            raise InvalidModel(f"bad probability {p!r}") from None
    if isinstance(p, float):
        # floats are taken at their shortest decimal spelling, not their binary value
        return Fraction(repr(p))
    raise InvalidModel(f"bad probability {p!r}")


# -- counting events --------------------------------------------------------

_OPS = {
    "==": lambda c, n: c == n,
    ">=": lambda c, n: c >= n,
    "<=": lambda c, n: c <= n,
    ">": lambda c, n: c > n,
    "<": lambda c, n: c < n,
}

_bound_cache: dict[tuple[int, int], tuple[Any, Any, BoundSet]] = {}


def _bound(expr: FactSetExpr, schema: Schema) -> BoundSet:
    key = (id(expr), id(schema))
    hit = _bound_cache.get(key)
    if hit is not None and hit[0] is expr and hit[1] is schema:
        return hit[2]
    if len(_bound_cache) > 512:
        _bound_cache.clear()
    try:
        b = bind(expr, schema)
    except PpdbError as e:
        if isinstance(e, SchemaMismatch):
            raise
        raise SchemaMismatch(f"event does not fit the schema: {e}") from e
    _bound_cache[key] = (expr, schema, b)
    return b


class Event:
    def holds(self, instance: BagInstance) -> bool:
        raise NotImplementedError

    def check(self, schema: Schema) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class CountingEvent(Event):
    """Instances with ``count(D, fact_set) <op> n``."""

    fact_set: FactSetExpr
    op: str = "=="
    n: int = 0

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown count comparison {self.op!r}")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 0:
            raise ValueError("count must be a nonnegative integer")

    def check(self, schema: Schema) -> None:
        _bound(self.fact_set, schema)

    def holds(self, instance: BagInstance) -> bool:
        return _OPS[self.op](count_in_set(instance, _bound(self.fact_set, instance.schema)), self.n)


@dataclass(frozen=True)
class EventAll(Event):
    events: tuple

    def check(self, schema):
        for e in self.events:
            e.check(schema)

    def holds(self, instance):
        return all(e.holds(instance) for e in self.events)


@dataclass(frozen=True)
class EventAny(Event):
    events: tuple

    def check(self, schema):
        for e in self.events:
            e.check(schema)

    def holds(self, instance):
        return any(e.holds(instance) for e in self.events)


@dataclass(frozen=True)
class EventNot(Event):
    event: Event

    def check(self, schema):
        self.event.check(schema)

    def holds(self, instance):
        return not self.event.holds(instance)


def certain_event() -> CountingEvent:
    return CountingEvent(FactSetExpr.full(), ">=", 0)


def event_from_json(obj: Mapping[str, Any]) -> Event:
    if "all" in obj:
        return EventAll(tuple(event_from_json(e) for e in obj["all"]))
    if "any" in obj:
        return EventAny(tuple(event_from_json(e) for e in obj["any"]))
    if "not" in obj:
        return EventNot(event_from_json(obj["not"]))
    try:
        return CountingEvent(set_from_json(obj["set"]), obj.get("op", "=="), obj["n"])
    except KeyError as e:
        raise InvalidModel(f"event is missing {e.args[0]!r}") from None


def event_to_json(ev: Event) -> dict:
    if isinstance(ev, CountingEvent):
        return {"set": set_to_json(ev.fact_set), "op": ev.op, "n": ev.n}
    if isinstance(ev, EventAll):
        return {"all": [event_to_json(e) for e in ev.events]}
    if isinstance(ev, EventAny):
        return {"any": [event_to_json(e) for e in ev.events]}
    if isinstance(ev, EventNot):
        return {"not": event_to_json(ev.event)}
    raise TypeError(f"not an event: {ev!r}")


# -- finite PDBs ------------------------------------------------------------


class WorldSampler(Protocol):
    schema: Schema

    def sample(self, seed: int, index: int) -> BagInstance: ...


class FinitePdb:
    """Finitely many worlds with exact rational probabilities.

    Duplicate worlds are merged by adding their probabilities; probabilities
    must be nonnegative and sum to exactly 1.  Zero-probability worlds are
    kept (they matter for nothing but are reported faithfully).
    """

    __slots__ = ("schema", "worlds")

    def __init__(self, schema: Schema, worlds: Iterable[tuple[BagInstance, Any]]):
        merged: dict[BagInstance, Fraction] = {}
        for inst, p in worlds:
            p = _fraction(p)
            if p < 0:
                raise InvalidModel(f"negative probability {p}")
            if inst.schema != schema:
                inst = BagInstance(schema, dict(inst.items()))
            merged[inst] = merged.get(inst, Fraction(0)) + p
        total = sum(merged.values(), Fraction(0))
        if total != 1:
            raise InvalidModel(f"world probabilities sum to {total}, not 1")
        self.schema = schema
        self.worlds: tuple[tuple[BagInstance, Fraction], ...] = tuple(merged.items())

    def __iter__(self):
        return iter(self.worlds)

    def __len__(self):
        return len(self.worlds)

    def __eq__(self, other):
        if not isinstance(other, FinitePdb):
            return NotImplemented
        return self.schema == other.schema and dict(self.worlds) == dict(other.worlds)

    def __repr__(self):
        return f"FinitePdb({len(self.worlds)} worlds)"

    def probability_of(self, world: BagInstance) -> Fraction:
        return dict(self.worlds).get(world, Fraction(0))

    def is_simple(self) -> bool:
        return all(inst.is_set() for inst, p in self.worlds if p > 0)

    def mirror(self) -> FiniteSampler:
        return FiniteSampler(self)

    def sample(self, seed: int, index: int) -> BagInstance:
        return self.mirror().sample(seed, index)

    def to_json(self) -> dict:
        worlds = sorted(self.worlds, key=lambda w: _world_order(w[0]))
        return {
            "kind": "finite",
            "schema": self.schema.to_json(),
            "worlds": [{"prob": _fmt_fraction(p), "facts": instance_to_json(inst)} for inst, p in worlds],
        }


def _fmt_fraction(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def _world_order(inst: BagInstance):
    return json.dumps(instance_to_json(inst))


def exact_event_probability(pdb: FinitePdb, event: Event) -> Fraction:
    event.check(pdb.schema)
    return sum((p for inst, p in pdb.worlds if event.holds(inst)), Fraction(0))


def is_simple(pdb) -> bool:
    if isinstance(pdb, FinitePdb):
        return pdb.is_simple()
    return bool(getattr(pdb, "simple", False))


class FiniteSampler:
    """Finite-support sampler drawing world ``i`` with probability ``p_i``.

    Draw 0 of stream ``stream_key(seed, index, 0)`` is compared against the
    exact integer thresholds ``ceil(C_i * 2**64)`` of the cumulative
    probabilities, so the selection frequencies are exact to within 2**-64.
    """

    def __init__(self, pdb: FinitePdb):
        self.pdb = pdb
        self.schema = pdb.schema
        # zero-probability worlds are never drawn
        self._support = [i for i, (_, p) in enumerate(pdb.worlds) if p > 0]
        cum = Fraction(0)
        th = []
        for i in self._support[:-1]:
            cum += pdb.worlds[i][1]
            th.append(min(-((-cum.numerator << 64) // cum.denominator), (1 << 64) - 1))
        self._thresholds = th
        self._np_thresholds = np.array(th, dtype=np.uint64)
        self._np_support = np.array(self._support, dtype=np.int64)

    @property
    def simple(self) -> bool:
        return self.pdb.is_simple()

    def world_index(self, seed: int, index: int) -> int:
        x = Stream(stream_key(seed, index, 0)).next_u64()
        return self._support[bisect.bisect_right(self._thresholds, x)]

    def world_indices(self, seed: int, start: int, count: int) -> np.ndarray:
        x = first_draws(seed, start, count, 0)
        return self._np_support[np.searchsorted(self._np_thresholds, x, side="right")]

    def sample(self, seed: int, index: int) -> BagInstance:
        return self.pdb.worlds[self.world_index(seed, index)][0]


# -- point-process samplers -------------------------------------------------


@dataclass(frozen=True)
class Fixed:
    n: int

    def validate(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 0:
            raise InvalidModel("fixed count must be a nonnegative integer")

    def draw(self, s: Stream) -> int:
        return self.n

    def to_json(self):
        return {"kind": "fixed", "n": self.n}


def _cdf(weights: Sequence[float]) -> list[float]:
    out, acc = [], 0.0
    for w in weights:
        acc += w
        out.append(acc)
    return out


def _invert(cdf: list[float], u: float) -> int:
    return min(bisect.bisect_right(cdf, u * cdf[-1]), len(cdf) - 1)


def _check_weights(ws, what):
    if not ws:
        raise InvalidModel(f"{what}: no weights")
    for w in ws:
        if isinstance(w, bool) or not isinstance(w, (int, float)) or not math.isfinite(w) or w < 0:
            raise InvalidModel(f"{what}: bad weight {w!r}")
    if sum(ws) <= 0:
        raise InvalidModel(f"{what}: weights sum to zero")


@dataclass(frozen=True)
class Poisson:
    lam: float
    n_max: int
    _cdf: tuple = field(default=(), compare=False, repr=False)

    def validate(self):
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise InvalidModel("Poisson rate must be positive")
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, int) or self.n_max < 0:
            raise InvalidModel("Poisson n_max must be a nonnegative integer")
        object.__setattr__(self, "_cdf", tuple(_cdf(self.weights())))

    def weights(self) -> list[float]:
        """Unnormalized pmf on ``0..n_max``, scaled so the mode has weight 1."""
        lam = float(self.lam)
        mode = min(int(lam), self.n_max)
        w = [0.0] * (self.n_max + 1)
        w[mode] = 1.0
        for k in range(mode, self.n_max):
            w[k + 1] = w[k] * lam / (k + 1)
        for k in range(mode, 0, -1):
            w[k - 1] = w[k] * k / lam
        return w

    def draw(self, s: Stream) -> int:
        if not self._cdf:
            self.validate()
        return _invert(list(self._cdf), s.uniform())

    def to_json(self):
        return {"kind": "poisson", "lambda": self.lam, "n_max": self.n_max}


@dataclass(frozen=True)
class CountCategorical:
    """Count ``k`` with probability proportional to ``weights[k]``, ``k = 0..n_max``."""

    weights: tuple

    def validate(self):
        _check_weights(self.weights, "count distribution")

    def draw(self, s: Stream) -> int:
        return _invert(_cdf(self.weights), s.uniform())

    def to_json(self):
        return {"kind": "categorical", "weights": list(self.weights)}


@dataclass(frozen=True)
class UniformInt:
    lo: int
    hi: int

    def validate(self, dom):
        if dom.kind != INT:
            raise InvalidModel("uniform_int needs an integer attribute")
        if not (isinstance(self.lo, int) and isinstance(self.hi, int)) or self.lo > self.hi:
            raise InvalidModel("uniform_int needs integers lo <= hi")
        if not (dom.contains(self.lo) and dom.contains(self.hi)):
            raise InvalidModel(f"uniform_int [{self.lo}, {self.hi}] leaves the attribute domain")

    def draw(self, s: Stream, dom):
        return self.lo + s.below(self.hi - self.lo + 1)

    def to_json(self):
        return {"kind": "uniform_int", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class CategoricalWeighted:
    values: tuple
    weights: tuple

    def validate(self, dom):
        if len(self.values) != len(self.weights):
            raise InvalidModel("categorical: values and weights differ in length")
        _check_weights(self.weights, "categorical")
        for v in self.values:
            if not dom.contains(v):
                raise InvalidModel(f"categorical value {v!r} is not in the attribute domain")

    def draw(self, s: Stream, dom):
        return dom.normalize(self.values[_invert(_cdf(self.weights), s.uniform())])

    def to_json(self):
        return {"kind": "categorical", "values": list(self.values), "weights": list(self.weights)}


@dataclass(frozen=True)
class UniformReal:
    lo: float
    hi: float

    def validate(self, dom):
        if dom.kind != REAL:
            raise InvalidModel("uniform_real needs a real attribute")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise InvalidModel("uniform_real needs finite lo <= hi")
        if not (dom.contains(self.lo) and dom.contains(self.hi)):
            raise InvalidModel(f"uniform_real [{self.lo}, {self.hi}] leaves the attribute domain")

    def draw(self, s: Stream, dom):
        lo, hi = float(self.lo), float(self.hi)
        return dom.normalize(min(lo + s.uniform() * (hi - lo), hi))

    def to_json(self):
        return {"kind": "uniform_real", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def validate(self, dom):
        if dom.kind != REAL:
            raise InvalidModel("normal needs a real attribute")
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidModel("normal needs a finite mean and sigma > 0")
        if self.mass(dom) < NORMAL_MIN_MASS:
            raise InvalidModel(
                f"normal({self.mu}, {self.sigma}) puts less than {NORMAL_MIN_MASS} of its mass in the attribute interval"
            )

    def mass(self, dom: RealInterval) -> float:
        def cdf(x):
            if x == math.inf:
                return 1.0
            if x == -math.inf:
                return 0.0
            return 0.5 * (1 + math.erf((x - self.mu) / (self.sigma * math.sqrt(2))))

        return cdf(dom.hi) - cdf(dom.lo)

    def draw(self, s: Stream, dom):
        for _ in range(NORMAL_MAX_TRIES):
            u1, u2 = s.uniform(), s.uniform()
            z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
            x = self.mu + self.sigma * z
            if dom.contains(x):
                return dom.normalize(x)
        return dom.normalize(min(max(float(self.mu), dom.lo), dom.hi))

    def to_json(self):
        return {"kind": "normal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class RelationModel:
    count: Any
    tuple_model: tuple


class PointProcessPdb:
    """Independent relations; per relation a count model and i.i.d. tuples."""

    def __init__(self, schema: Schema, relations: Mapping[str, RelationModel], simple: bool = False):
        self.schema = schema
        self.relations = dict(relations)
        self.simple = simple
        self.validate()
        self._order = sorted(self.relations)

    def validate(self) -> None:
        for name, model in self.relations.items():
            doms = self.schema.domains_of(name)
            if len(model.tuple_model) != len(doms):
                raise InvalidModel(f"{name}: tuple model has {len(model.tuple_model)} components, arity is {len(doms)}")
            model.count.validate()
            for comp, dom in zip(model.tuple_model, doms):
                comp.validate(dom)

    def sample(self, seed: int, index: int) -> BagInstance:
        counts: dict[Fact, int] = {}
        for ordinal, name in enumerate(self._order):
            model = self.relations[name]
            doms = self.schema.domains_of(name)
            s = Stream(stream_key(seed, index, ordinal))
            n = model.count.draw(s)
            for _ in range(n):
                f = Fact(name, tuple(c.draw(s, d) for c, d in zip(model.tuple_model, doms)))
                counts[f] = counts.get(f, 0) + 1
        return BagInstance(self.schema, counts, trusted=True)

    def to_json(self) -> dict:
        return {
            "kind": "point_process",
            "schema": self.schema.to_json(),
            "simple": self.simple,
            "relations": {
                name: {"count": m.count.to_json(), "tuple": [c.to_json() for c in m.tuple_model]}
                for name, m in sorted(self.relations.items())
            },
        }


def sample_world(pdb, seed: int, index: int) -> BagInstance:
    return pdb.sample(seed, index)


# -- JSON -------------------------------------------------------------------


def _count_from_json(obj) -> Any:
    kind = obj.get("kind")
    try:
        if kind == "fixed":
            return Fixed(obj["n"])
        if kind == "poisson":
            return Poisson(obj["lambda"], obj["n_max"])
        if kind == "categorical":
            return CountCategorical(tuple(obj["weights"]))
    except KeyError as e:
        raise InvalidModel(f"count model {kind!r} is missing {e.args[0]!r}") from None
    raise InvalidModel(f"unknown count model {kind!r}")


def _component_from_json(obj) -> Any:
    kind = obj.get("kind")
    try:
        if kind == "uniform_int":
            return UniformInt(obj["lo"], obj["hi"])
        if kind == "categorical":
            return CategoricalWeighted(tuple(obj["values"]), tuple(obj.get("weights") or [1] * len(obj["values"])))
        if kind == "uniform_real":
            return UniformReal(float(obj["lo"]), float(obj["hi"]))
        if kind == "normal":
            return Normal(float(obj["mu"]), float(obj["sigma"]))
    except KeyError as e:
        raise InvalidModel(f"tuple model {kind!r} is missing {e.args[0]!r}") from None
    raise InvalidModel(f"unknown tuple model {kind!r}")


def pdb_from_json(obj: Mapping[str, Any], schema: Schema | None = None):
    if "schema" in obj:
        schema = schema_from_json(obj["schema"])
    if schema is None:
        raise InvalidModel("PDB has no schema; pass one explicitly")
    kind = obj.get("kind")
    if kind == "finite":
        worlds = []
        for w in obj["worlds"]:
            worlds.append((instance_from_json(schema, w.get("facts", [])), w["prob"]))
        return FinitePdb(schema, worlds)
    if kind == "point_process":
        rels = {}
        for name, m in obj["relations"].items():
            schema.type_of(name)
            rels[name] = RelationModel(
                _count_from_json(m["count"]), tuple(_component_from_json(c) for c in m["tuple"])
            )
        return PointProcessPdb(schema, rels, simple=bool(obj.get("simple", False)))
    raise InvalidModel(f"unknown PDB kind {kind!r}")


def load_pdb(path: str | Path, schema: Schema | None = None):
    with open(path, encoding="utf-8") as fh:
        return pdb_from_json(json.load(fh), schema)
