"""Positive datalog with set semantics.

Programs are evaluated as the least fixpoint of the immediate-consequence
operator.  EDB inputs are deduplicated first; every output fact has
multiplicity 1.  ``stages`` exposes the inflationary sequence
``Q^(0) ⊆ Q^(1) ⊆ ...`` whose limit is the query answer; on a finite instance
it becomes stationary after finitely many steps because rule heads only
recombine values from the active domain and the program constants.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator

from .algebra import Query
from .errors import TypeMismatch, UnsafeRule
from .instances import BagInstance, Fact
from .schema import Categorical, IntegerAll, RealInterval, Schema, is_int_value


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def variables(self) -> set[str]:
        return {t.name for t in self.terms if isinstance(t, Var)}

    def __str__(self):
        return f"{self.relation}({', '.join(_term_str(t) for t in self.terms)})"


def _term_str(t) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, str):
        return '"' + t.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(t)


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(a) for a in self.body)}."


@dataclass(frozen=True)
class Program(Query):
    """A datalog query: rules plus the designated output IDB relation."""

    rules: tuple
    output: str

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    @property
    def idb(self) -> list[str]:
        seen = []
        for r in self.rules:
            if r.head.relation not in seen:
                seen.append(r.head.relation)
        if self.output not in seen:
            seen.append(self.output)
        return seen

    def idb_schema(self, schema: Schema) -> Schema:
        return _infer_idb(self, schema)

    def infer(self, schema: Schema) -> Schema:
        return self.idb_schema(schema).restrict([self.output])

    def run(self, instance: BagInstance) -> BagInstance:
        return eval_datalog(self, instance)

    def __str__(self):
        return "\n".join([*(str(r) for r in self.rules), f"#output {self.output}"])


# -- static checks ---------------------------------------------------------


def check_safety(program: Program) -> None:
    for r in program.rules:
        body_vars = set().union(*(a.variables() for a in r.body)) if r.body else set()
        loose = r.head.variables() - body_vars
        if loose:
            raise UnsafeRule(f"head variables {sorted(loose)} do not occur in the body of: {r}")


def _literal_domain(values: list):
    if all(is_int_value(v) for v in values):
        return IntegerAll()
    if all(isinstance(v, str) for v in values):
        return Categorical(tuple(sorted(set(values))))
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        return RealInterval()
    raise TypeMismatch(f"head constants {values} mix strings and numbers")


def _infer_idb(program: Program, schema: Schema) -> Schema:
    check_safety(program)
    idb = program.idb
    for name in idb:
        if name in schema.relations:
            raise TypeMismatch(f"IDB relation {name!r} clashes with an EDB relation")
    arity: dict[str, int] = {}
    for r in program.rules:
        for a in (r.head, *r.body):
            if a.relation not in idb and a.relation not in schema.relations:
                raise TypeMismatch(f"unknown relation {a.relation!r} in rule: {r}")
            n = len(a.terms) if a.relation in idb else len(schema.type_of(a.relation))
            if arity.setdefault(a.relation, n) != len(a.terms):
                raise TypeMismatch(f"{a.relation} used with arity {len(a.terms)} but expects {arity[a.relation]}")
    doms: dict[str, list] = {name: [None] * arity.get(name, 0) for name in idb}

    def rel_doms(name):
        return doms[name] if name in doms else list(schema.domains_of(name))

    def bind_vars(rule):
        env = {}
        for a in rule.body:
            for d, t in zip(rel_doms(a.relation), a.terms):
                if d is None:
                    continue
                if isinstance(t, Var):
                    if t.name in env and env[t.name] != d:
                        raise TypeMismatch(f"variable {t.name} joins attributes of different domains in: {rule}")
                    env[t.name] = d
                elif not d.contains(t):
                    raise TypeMismatch(f"constant {t!r} is not admissible for {a.relation} in: {rule}")
        return env

    changed = True
    while changed:
        changed = False
        for r in program.rules:
            env = bind_vars(r)
            cur = doms[r.head.relation]
            for i, t in enumerate(r.head.terms):
                if isinstance(t, Var) and t.name in env:
                    d = env[t.name]
                    if cur[i] is None:
                        cur[i] = d
                        changed = True
                    elif cur[i] != d:
                        raise TypeMismatch(f"{r.head.relation} position {i + 1} receives different domains")
    # positions fed only by head constants take the constants' literal domain
    for name, ds in doms.items():
        for i, d in enumerate(ds):
            if d is None:
                consts = [r.head.terms[i] for r in program.rules
                          if r.head.relation == name and not isinstance(r.head.terms[i], Var)]
                ds[i] = _literal_domain(consts) if consts else IntegerAll()
    for r in program.rules:
        bind_vars(r)
        for d, t in zip(doms[r.head.relation], r.head.terms):
            if not isinstance(t, Var) and not d.contains(t):
                raise TypeMismatch(f"head constant {t!r} is not admissible in: {r}")

    taken = set(schema.attributes) | set(schema.relations) | set(idb)
    attrs, rels = {}, {}
    for name in idb:
        typ = []
        for i, d in enumerate(doms[name]):
            a = f"{name}_{i + 1}"
            while a in taken:
                a += "_"
            taken.add(a)
            attrs[a] = d
            typ.append(a)
        rels[name] = tuple(typ)
    return Schema(attrs, rels)


# -- evaluation ------------------------------------------------------------


class _Index:
    """Lazily built hash indexes over a relation → set-of-tuples store."""

    def __init__(self, store: dict[str, set]):
        self.store = store
        self._idx: dict = {}

    def lookup(self, rel: str, positions: tuple, key: tuple):
        if not positions:
            return self.store.get(rel, ())
        k = (rel, positions)
        idx = self._idx.get(k)
        if idx is None:
            idx = defaultdict(list)
            for t in self.store.get(rel, ()):
                idx[tuple(t[p] for p in positions)].append(t)
            self._idx[k] = idx
        return idx.get(key, ())


def _match(body: tuple, sources: list[_Index], env: dict) -> Iterator[dict]:
    if not body:
        yield env
        return
    atom, rest = body[0], body[1:]
    src = sources[0]
    positions, key = [], []
    for p, t in enumerate(atom.terms):
        if isinstance(t, Var):
            if t.name in env:
                positions.append(p)
                key.append(env[t.name])
        else:
            positions.append(p)
            key.append(t)
    for tup in src.lookup(atom.relation, tuple(positions), tuple(key)):
        new = dict(env)
        ok = True
        for t, v in zip(atom.terms, tup):
            if isinstance(t, Var):
                if new.setdefault(t.name, v) != v:
                    ok = False
                    break
        if ok:
            yield from _match(rest, sources[1:], new)


def _head(rule: Rule, env: dict, doms) -> tuple:
    return tuple(d.normalize(env[t.name]) if isinstance(t, Var) else d.normalize(t)
                 for d, t in zip(doms, rule.head.terms))


def _edb(instance: BagInstance) -> dict[str, set]:
    store: dict[str, set] = defaultdict(set)
    for f in instance.support():
        store[f.relation].add(f.values)
    return store


def _naive_step(program, edb, idb, doms):
    full = _Index({**edb, **idb})
    new = {name: set(ts) for name, ts in idb.items()}
    for r in program.rules:
        for env in _match(r.body, [full] * len(r.body), {}):
            new[r.head.relation].add(_head(r, env, doms[r.head.relation]))
    return new


def _seminaive_step(program, edb, idb, delta, doms):
    """Only derivations that use at least one fact from the last delta."""
    idb_names = set(idb)
    full = _Index({**edb, **idb})
    dl = _Index(delta)
    new = {name: set(ts) for name, ts in idb.items()}
    for r in program.rules:
        hot = [i for i, a in enumerate(r.body) if a.relation in idb_names]
        for j in hot:
            sources = [dl if i == j else full for i in range(len(r.body))]
            for env in _match(r.body, sources, {}):
                new[r.head.relation].add(_head(r, env, doms[r.head.relation]))
    return new


def stages(program: Program, instance: BagInstance, method: str = "seminaive") -> Iterator[dict[str, set]]:
    """Yield the IDB stores of stage 0, 1, 2, ... until (and including) the fixpoint."""
    schema = program.idb_schema(instance.schema)
    doms = {name: schema.domains_of(name) for name in program.idb}
    edb = _edb(instance)
    idb = {name: set() for name in program.idb}
    yield idb
    delta = None
    while True:
        if method not in ("naive", "seminaive"):
            raise ValueError(f"unknown method {method!r}")
        if method == "naive" or delta is None:
            nxt = _naive_step(program, edb, idb, doms)
        else:
            nxt = _seminaive_step(program, edb, idb, delta, doms)
        delta = {name: nxt[name] - idb[name] for name in idb}
        if not any(delta.values()):
            return
        idb = nxt
        yield idb


def _to_instance(program: Program, instance: BagInstance, idb: dict[str, set], all_idb: bool) -> BagInstance:
    schema = program.idb_schema(instance.schema)
    names = program.idb if all_idb else [program.output]
    out = schema.restrict(names)
    counts = {Fact(n, t): 1 for n in names for t in idb.get(n, ())}
    return BagInstance(out, counts, trusted=True)


def eval_datalog(program: Program, instance: BagInstance, method: str = "seminaive", all_idb: bool = False) -> BagInstance:
    last = None
    for last in stages(program, instance, method):
        pass
    return _to_instance(program, instance, last, all_idb)


def eval_stage(program: Program, instance: BagInstance, n: int, method: str = "naive", all_idb: bool = False) -> BagInstance:
    """The ``n``-th inflationary stage; equal to the fixpoint for large ``n``."""
    if n < 0:
        raise ValueError("stage index must be nonnegative")
    last = None
    for i, last in enumerate(stages(program, instance, method)):
        if i == n:
            break
    return _to_instance(program, instance, last, all_idb)


def stage_bound(program: Program, instance: BagInstance) -> int:
    """|adom|^(max head arity) · |IDB|: an upper bound on the stages to the fixpoint."""
    adom = {v for f in instance.support() for v in f.values}
    for r in program.rules:
        for a in (r.head, *r.body):
            adom.update(t for t in a.terms if not isinstance(t, Var))
    arity = max((len(r.head.terms) for r in program.rules), default=0)
    return len(adom) ** arity * len(program.idb)


# -- translation of one non-recursive rule to algebra ----------------------


def rule_to_algebra(rule: Rule, schema: Schema) -> Query:
    """Select-project-join query computing one non-recursive rule (set semantics).

    Supports heads whose terms are pairwise distinct variables.
    """
    from .algebra import Dedup, Extract, NaturalJoin, Project, Rename, Select
    from .sets import And, Equals, PairEquals

    head_vars = [t.name for t in rule.head.terms if isinstance(t, Var)]
    if len(head_vars) != len(rule.head.terms) or len(set(head_vars)) != len(head_vars):
        raise ValueError("only heads made of distinct variables are supported")
    if not rule.body:
        raise ValueError("rule has an empty body")
    check_safety(Program((rule,), rule.head.relation))
    parts = []
    fresh = 0
    for a in rule.body:
        typ = schema.type_of(a.relation)
        conds = []
        first_pos: dict[str, int] = {}
        for p, t in enumerate(a.terms):
            if isinstance(t, Var):
                if t.name in first_pos:
                    conds.append(PairEquals(first_pos[t.name], p))
                else:
                    first_pos[t.name] = p
            else:
                conds.append(Equals(p, t))
        q: Query = Extract(a.relation)
        if conds:
            q = Select(q, And(tuple(conds)))
        keep = []
        for p, attr in enumerate(typ):
            t = a.terms[p]
            if isinstance(t, Var) and first_pos[t.name] == p:
                q = Rename(q, attr, f"_v_{t.name}")
                keep.append(f"_v_{t.name}")
            else:
                fresh += 1
                q = Rename(q, attr, f"_c_{fresh}")
        parts.append(Project(q, tuple(keep)))
    q = parts[0]
    for p in parts[1:]:
        q = NaturalJoin(q, p)
    return Dedup(Project(q, tuple(f"_v_{v}" for v in head_vars)))


def parse_program(text: str, output: str | None = None) -> Program:
    from .parsing import parse_datalog

    return parse_datalog(text, output)


def iter_rules(program: Program) -> Iterable[Rule]:
    return iter(program.rules)
