"""Constructible measurable sets of facts.

A :class:`FactSetExpr` maps relation names to Boolean trees over a small set
of atoms (intervals, equality with a constant, membership in a finite set,
equality or strict order between two attributes of the same fact).  Every
expressible set is a finite Boolean combination of measurable rectangles, so
there is deliberately no projection or existential operator.

Expressions are written against attribute names or positions; :func:`bind`
resolves them against a schema, validates them and compiles membership tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Union

from .errors import BadAttributePosition, BadRange, DomainMismatch, UnknownRelation
from .instances import Fact
from .schema import STR, Categorical, IntegerRange, RealInterval, Schema, is_real_value

Attr = Union[int, str]


# -- atoms -----------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """``lo ≤ A ≤ hi`` with per-side openness; ``None`` means unbounded."""

    attr: Attr
    lo: Any = None
    hi: Any = None
    lo_closed: bool = True
    hi_closed: bool = True


@dataclass(frozen=True)
class Equals:
    attr: Attr
    value: Any


@dataclass(frozen=True)
class InSet:
    attr: Attr
    values: frozenset

    def __post_init__(self):
        object.__setattr__(self, "values", frozenset(self.values))


@dataclass(frozen=True)
class PairEquals:
    left: Attr
    right: Attr


@dataclass(frozen=True)
class PairLess:
    left: Attr
    right: Attr


Atom = Union[Interval, Equals, InSet, PairEquals, PairLess]


# -- Boolean structure -----------------------------------------------------


@dataclass(frozen=True)
class And:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Or:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Not:
    arg: Any


@dataclass(frozen=True)
class Const:
    value: bool


TRUE = Const(True)
FALSE = Const(False)

Pred = Union[Atom, And, Or, Not, Const]


@dataclass(frozen=True)
class FactSetExpr:
    """Per-relation predicates.  Relations without an entry denote ∅ unless
    ``default`` is given, in which case it applies to every other relation."""

    parts: Mapping[str, Pred]
    default: Pred | None = None

    def __post_init__(self):
        object.__setattr__(self, "parts", dict(self.parts))

    @classmethod
    def full(cls) -> "FactSetExpr":
        return cls({}, TRUE)

    @classmethod
    def empty(cls) -> "FactSetExpr":
        return cls({}, None)

    @classmethod
    def of(cls, relation: str, pred: Pred = TRUE) -> "FactSetExpr":
        return cls({relation: pred})

    def pred_for(self, relation: str) -> Pred:
        if relation in self.parts:
            return self.parts[relation]
        return self.default if self.default is not None else FALSE

    def union(self, other: "FactSetExpr") -> "FactSetExpr":
        return self._combine(other, lambda a, b: Or((a, b)))

    def intersect(self, other: "FactSetExpr") -> "FactSetExpr":
        return self._combine(other, lambda a, b: And((a, b)))

    def complement(self) -> "FactSetExpr":
        parts = {r: Not(p) for r, p in self.parts.items()}
        default = TRUE if self.default is None else Not(self.default)
        return FactSetExpr(parts, default)

    def _combine(self, other, op) -> "FactSetExpr":
        rels = set(self.parts) | set(other.parts)
        parts = {r: op(self.pred_for(r), other.pred_for(r)) for r in rels}
        if self.default is None and other.default is None:
            default = None
        else:
            default = op(self.default or FALSE, other.default or FALSE)
        return FactSetExpr(parts, default)


# -- binding ---------------------------------------------------------------


def _resolve(attr: Attr, typ: tuple[str, ...], relation: str) -> int:
    if isinstance(attr, bool):
        raise BadAttributePosition(f"bad attribute reference {attr!r}")
    if isinstance(attr, int):
        if 0 <= attr < len(typ):
            return attr
        raise BadAttributePosition(f"position {attr} out of range for {relation} of arity {len(typ)}")
    if attr in typ:
        return typ.index(attr)
    raise BadAttributePosition(f"{relation} has no attribute {attr!r}")


def _const(dom, v: Any, what: str):
    """Coerce a constant to the domain's kind (decimal strings for numbers)."""
    if dom.kind == STR:
        if not isinstance(v, str):
            raise DomainMismatch(f"{what}: expected a category, got {v!r}")
        if isinstance(dom, Categorical) and not dom.contains(v):
            raise DomainMismatch(f"{what}: {v!r} is not a category of {dom.categories}")
        return v
    if isinstance(v, str):
        try:
            v = int(v) if dom.kind == "int" and _looks_int(v) else float(v)
        except ValueError:
            raise DomainMismatch(f"{what}: {v!r} is not numeric") from None
    if not (is_real_value(v) or (isinstance(v, float) and math.isinf(v))):
        raise DomainMismatch(f"{what}: {v!r} is not numeric")
    return v


def _looks_int(s: str) -> bool:
    s = s.strip()
    return s.lstrip("+-").isdigit()


def bind_pred(pred: Pred, schema: Schema, relation: str) -> Pred:
    """Resolve attribute names to positions and check the tree against ``relation``."""
    typ = schema.type_of(relation)
    doms = schema.domains_of(relation)

    def go(p):
        if isinstance(p, Const):
            return p
        if isinstance(p, And):
            return And(tuple(go(a) for a in p.args))
        if isinstance(p, Or):
            return Or(tuple(go(a) for a in p.args))
        if isinstance(p, Not):
            return Not(go(p.arg))
        if isinstance(p, Interval):
            i = _resolve(p.attr, typ, relation)
            d = doms[i]
            lo = None if p.lo is None else _const(d, p.lo, f"{relation}.{typ[i]}")
            hi = None if p.hi is None else _const(d, p.hi, f"{relation}.{typ[i]}")
            if isinstance(d, Categorical):
                if lo is not None and hi is not None and d.index(lo) > d.index(hi):
                    raise BadRange(f"{relation}.{typ[i]}: {lo!r} comes after {hi!r}")
                keep = []
                for c in d.categories:
                    k = d.index(c)
                    if lo is not None and (k < d.index(lo) or (k == d.index(lo) and not p.lo_closed)):
                        continue
                    if hi is not None and (k > d.index(hi) or (k == d.index(hi) and not p.hi_closed)):
                        continue
                    keep.append(c)
                return InSet(i, frozenset(keep))
            if lo is not None and hi is not None and lo > hi:
                raise BadRange(f"{relation}.{typ[i]}: lo {lo} > hi {hi}")
            return Interval(i, lo, hi, p.lo_closed, p.hi_closed)
        if isinstance(p, Equals):
            i = _resolve(p.attr, typ, relation)
            return Equals(i, _const(doms[i], p.value, f"{relation}.{typ[i]}"))
        if isinstance(p, InSet):
            i = _resolve(p.attr, typ, relation)
            return InSet(i, frozenset(_const(doms[i], v, f"{relation}.{typ[i]}") for v in p.values))
        if isinstance(p, (PairEquals, PairLess)):
            i = _resolve(p.left, typ, relation)
            j = _resolve(p.right, typ, relation)
            if doms[i] != doms[j]:
                raise DomainMismatch(f"{relation}: cannot compare {typ[i]} ({doms[i]}) with {typ[j]} ({doms[j]})")
            return type(p)(i, j)
        raise TypeError(f"not a predicate: {p!r}")

    return go(pred)


def compile_pred(pred: Pred, domains: tuple) -> Callable[[tuple], bool]:
    """Closure deciding membership of a value tuple in a bound predicate."""
    if isinstance(pred, Const):
        v = pred.value
        return lambda t: v
    if isinstance(pred, And):
        fs = [compile_pred(a, domains) for a in pred.args]
        return lambda t: all(f(t) for f in fs)
    if isinstance(pred, Or):
        fs = [compile_pred(a, domains) for a in pred.args]
        return lambda t: any(f(t) for f in fs)
    if isinstance(pred, Not):
        f = compile_pred(pred.arg, domains)
        return lambda t: not f(t)
    if isinstance(pred, Interval):
        i, lo, hi, lc, hc = pred.attr, pred.lo, pred.hi, pred.lo_closed, pred.hi_closed

        def interval(t):
            x = t[i]
            if lo is not None and (x < lo or (x == lo and not lc)):
                return False
            if hi is not None and (x > hi or (x == hi and not hc)):
                return False
            return True

        return interval
    if isinstance(pred, Equals):
        i, c = pred.attr, pred.value
        return lambda t: t[i] == c
    if isinstance(pred, InSet):
        i, vs = pred.attr, pred.values
        return lambda t: t[i] in vs
    if isinstance(pred, PairEquals):
        i, j = pred.left, pred.right
        return lambda t: t[i] == t[j]
    if isinstance(pred, PairLess):
        i, j = pred.left, pred.right
        d = domains[i]
        if isinstance(d, Categorical):
            return lambda t: d.index(t[i]) < d.index(t[j])
        return lambda t: t[i] < t[j]
    raise TypeError(f"not a predicate: {pred!r}")


class BoundSet:
    """A fact set checked against a schema, with compiled membership tests."""

    def __init__(self, schema: Schema, preds: dict[str, Pred]):
        self.schema = schema
        self.preds = preds
        self._tests = {r: compile_pred(p, schema.domains_of(r)) for r, p in preds.items()}

    def contains(self, fact: Fact) -> bool:
        test = self._tests.get(fact.relation)
        return test is not None and test(fact.values)

    def __contains__(self, fact: Fact) -> bool:
        return self.contains(fact)


def bind(expr: FactSetExpr | BoundSet, schema: Schema) -> BoundSet:
    if isinstance(expr, BoundSet):
        if expr.schema is schema:
            return expr
        raise TypeError("bound set belongs to another schema; pass the unbound expression")
    for r in expr.parts:
        if r not in schema.relations:
            raise UnknownRelation(f"set refers to unknown relation {r!r}")
    preds = {}
    for r in schema.relations:
        p = expr.pred_for(r)
        if p == FALSE:
            continue
        preds[r] = bind_pred(p, schema, r)
    return BoundSet(schema, preds)


def type_check(expr: FactSetExpr, schema: Schema) -> None:
    bind(expr, schema)


def contains(expr: FactSetExpr | BoundSet, fact: Fact, schema: Schema | None = None) -> bool:
    """Characteristic function of the set.  ``schema`` is needed for unbound expressions."""
    if isinstance(expr, BoundSet):
        return expr.contains(fact)
    if schema is None:
        raise TypeError("an unbound FactSetExpr needs a schema")
    return bind(expr, schema).contains(fact)


# -- overlap decision ------------------------------------------------------


def _atoms(p: Pred) -> Iterable[Atom]:
    if isinstance(p, (And, Or)):
        for a in p.args:
            yield from _atoms(a)
    elif isinstance(p, Not):
        yield from _atoms(p.arg)
    elif not isinstance(p, Const):
        yield p


def _succ(dom, x, step: int):
    if isinstance(dom, Categorical):
        k = dom.index(x) + step
        return dom.categories[k] if 0 <= k < len(dom.categories) else None
    if dom.kind == "int":
        y = x + step
    else:
        y = math.nextafter(x, math.inf if step > 0 else -math.inf)
        if math.isinf(y):
            return None
    return y if dom.contains(y) else None


def _anchor(dom):
    if isinstance(dom, Categorical):
        return dom.categories[0]
    if isinstance(dom, IntegerRange):
        return dom.lo
    if isinstance(dom, RealInterval):
        if dom.contains(0.0):
            return 0.0
        return dom.lo if math.isfinite(dom.lo) else dom.hi
    return 0


def representatives(dom, constants: Iterable[Any], k: int) -> list:
    """Finite set of domain values that meets every region cut out by ``constants``.

    Atoms using only these constants are constant on each open gap between
    consecutive constants; taking ``k`` consecutive values after each constant
    (and ``k`` before the smallest) realizes every order pattern of up to ``k``
    attributes inside any gap.
    """
    cs = set()
    for c in constants:
        if isinstance(c, float) and math.isinf(c):
            continue
        if dom.kind == "int" and isinstance(c, float):
            # gap boundaries for an integer domain sit at the neighbouring integers
            cs.update(x for x in (math.floor(c), math.ceil(c)) if dom.contains(x))
            continue
        if dom.contains(c):
            cs.add(dom.normalize(c))
    cs.add(_anchor(dom))
    ordered = sorted(cs, key=dom.sort_key)
    reps = set(ordered)
    for idx, c in enumerate(ordered):
        nxt = ordered[idx + 1] if idx + 1 < len(ordered) else None
        x = c
        for _ in range(k):
            x = _succ(dom, x, +1)
            if x is None or (nxt is not None and dom.sort_key(x) >= dom.sort_key(nxt)):
                break
            reps.add(x)
    x = ordered[0]
    for _ in range(k):
        x = _succ(dom, x, -1)
        if x is None:
            break
        reps.add(x)
    return sorted(reps, key=dom.sort_key)


MAX_WITNESS_CANDIDATES = 2_000_000


def find_witness(preds: Iterable[Pred], schema: Schema, relation: str) -> tuple | None:
    """A tuple satisfying every bound predicate, or ``None`` if their intersection is empty.

    The search is exhaustive over :func:`representatives`, so the answer is
    exact for all four domain kinds.
    """
    preds = list(preds)
    doms = schema.domains_of(relation)
    n = len(doms)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    consts: dict[int, list] = {i: [] for i in range(n)}
    for p in preds:
        for a in _atoms(p):
            if isinstance(a, (PairEquals, PairLess)):
                parent[find(a.left)] = find(a.right)
            elif isinstance(a, Interval):
                consts[a.attr] += [c for c in (a.lo, a.hi) if c is not None]
            elif isinstance(a, Equals):
                consts[a.attr].append(a.value)
            elif isinstance(a, InSet):
                consts[a.attr] += list(a.values)
    shared: dict[int, list] = {}
    for i in range(n):
        shared.setdefault(find(i), []).extend(consts[i])
    reps = [representatives(doms[i], shared[find(i)], max(n, 1)) for i in range(n)]
    if math.prod(len(r) for r in reps) > MAX_WITNESS_CANDIDATES:
        raise ValueError("too many candidate tuples for an exact overlap check")
    tests = [compile_pred(p, doms) for p in preds]
    for t in itertools.product(*reps):
        if all(f(t) for f in tests):
            return t
    return None


def intersects(a: FactSetExpr, b: FactSetExpr, schema: Schema) -> Fact | None:
    """A fact lying in both sets, or ``None`` when they are disjoint."""
    ba, bb = bind(a, schema), bind(b, schema)
    for r in sorted(set(ba.preds) & set(bb.preds)):
        t = find_witness([ba.preds[r], bb.preds[r]], schema, r)
        if t is not None:
            return Fact(r, t)
    return None


# -- JSON ------------------------------------------------------------------


def pred_from_json(obj: Any) -> Pred:
    if obj is True or obj is False:
        return Const(obj)
    if isinstance(obj, str):
        from .parsing import parse_pred

        return parse_pred(obj)
    if "atom" in obj:
        kind = obj["atom"]
        if kind == "interval":
            lo, hi = obj.get("lo"), obj.get("hi")
            lo = None if lo in ("-inf", None) else lo
            hi = None if hi in ("inf", "+inf", None) else hi
            return Interval(obj["attr"], lo, hi, bool(obj.get("lo_closed", True)), bool(obj.get("hi_closed", True)))
        if kind == "eq":
            return Equals(obj["attr"], obj["value"])
        if kind == "in":
            return InSet(obj["attr"], frozenset(obj["values"]))
        if kind in ("pair_eq", "pair_lt"):
            left, right = obj["attrs"] if "attrs" in obj else (obj["left"], obj["right"])
            return (PairEquals if kind == "pair_eq" else PairLess)(left, right)
        raise ValueError(f"unknown atom kind {kind!r}")
    op = obj.get("op")
    if op == "and":
        return And(tuple(pred_from_json(a) for a in obj["args"]))
    if op == "or":
        return Or(tuple(pred_from_json(a) for a in obj["args"]))
    if op == "not":
        return Not(pred_from_json(obj["arg"] if "arg" in obj else obj["args"][0]))
    if op in ("true", "false"):
        return Const(op == "true")
    raise ValueError(f"cannot read predicate {obj!r}")


def pred_to_json(p: Pred) -> Any:
    if isinstance(p, Const):
        return {"op": "true" if p.value else "false"}
    if isinstance(p, (And, Or)):
        return {"op": "and" if isinstance(p, And) else "or", "args": [pred_to_json(a) for a in p.args]}
    if isinstance(p, Not):
        return {"op": "not", "arg": pred_to_json(p.arg)}
    if isinstance(p, Interval):
        out = {"atom": "interval", "attr": p.attr}
        if p.lo is not None:
            out["lo"] = p.lo
        if p.hi is not None:
            out["hi"] = p.hi
        out["lo_closed"] = p.lo_closed
        out["hi_closed"] = p.hi_closed
        return out
    if isinstance(p, Equals):
        return {"atom": "eq", "attr": p.attr, "value": p.value}
    if isinstance(p, InSet):
        return {"atom": "in", "attr": p.attr, "values": sorted(p.values, key=lambda v: (isinstance(v, str), v))}
    if isinstance(p, PairEquals):
        return {"atom": "pair_eq", "left": p.left, "right": p.right}
    if isinstance(p, PairLess):
        return {"atom": "pair_lt", "left": p.left, "right": p.right}
    raise TypeError(f"not a predicate: {p!r}")


def set_from_json(obj: Mapping[str, Any]) -> FactSetExpr:
    """``{"R": <tree>, ...}``; the key ``"*"`` supplies a tree for all other relations."""
    parts = {r: pred_from_json(t) for r, t in obj.items() if r != "*"}
    default = pred_from_json(obj["*"]) if "*" in obj else None
    return FactSetExpr(parts, default)


def set_to_json(expr: FactSetExpr) -> dict:
    out = {r: pred_to_json(p) for r, p in sorted(expr.parts.items())}
    if expr.default is not None:
        out["*"] = pred_to_json(expr.default)
    return out
