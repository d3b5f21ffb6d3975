from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from ppdb.algebra import evaluate
from ppdb.datalog import (
    Atom,
    Program,
    Rule,
    Var,
    eval_datalog,
    eval_stage,
    parse_program,
    rule_to_algebra,
    stage_bound,
    stages,
)
from ppdb.errors import TypeMismatch, UnsafeRule
from ppdb.instances import BagInstance
from ppdb.schema import Categorical, IntegerRange, Schema

X, Y, Z = Var("X"), Var("Y"), Var("Z")
SCHEMA = Schema(
    {"A": IntegerRange(0, 5), "B": IntegerRange(0, 5), "L": Categorical(("red", "blue"))},
    {"E": ("A", "B"), "Col": ("A", "L")},
).validated()
TC = Program(
    (
        Rule(Atom("T", (X, Y)), (Atom("E", (X, Y)),)),
        Rule(Atom("T", (X, Z)), (Atom("T", (X, Y)), Atom("E", (Y, Z)))),
    ),
    "T",
)


def edges(*pairs, mult=1):
    return BagInstance.from_facts(SCHEMA, [("E", p) for p in pairs for _ in range(mult)])


def tuples(inst):
    return {f.values for f, _ in inst.items()}


def test_transitive_closure_example():
    d = edges((1, 2), (2, 3))
    out = eval_datalog(TC, d)
    assert tuples(out) == {(1, 2), (2, 3), (1, 3)}
    assert all(m == 1 for _, m in out.items())
    assert tuples(eval_stage(TC, d, 0)) == set()
    assert tuples(eval_stage(TC, d, 1)) == {(1, 2), (2, 3)}


def test_bag_inputs_are_deduplicated():
    assert eval_datalog(TC, edges((1, 2), mult=3)).multiplicity(("T", (1, 2))) == 1


def test_empty_program():
    out = eval_datalog(Program((), "Out"), edges((1, 2)))
    assert out.cardinality() == 0
    assert set(out.schema.relations) == {"Out"}


def test_output_schema_and_all_idb():
    p = parse_program("T(X, Y) :- E(X, Y).\nT(X, Z) :- T(X, Y), E(Y, Z).\nRed(X) :- Col(X, red).\n#output T")
    s = p.infer(SCHEMA)
    (name,) = s.relations
    assert name == "T" and [d for d in s.domains_of("T")] == [IntegerRange(0, 5), IntegerRange(0, 5)]
    d = BagInstance.from_facts(SCHEMA, [("E", (0, 1)), ("Col", (0, "red")), ("Col", (1, "blue"))])
    both = eval_datalog(p, d, all_idb=True)
    assert tuples(both) == {(0, 1), (0,)}


def test_facts_and_head_constants():
    p = parse_program('Tag(X, "hot") :- E(X, _).\nSeed(7).\n#output Tag')
    assert tuples(eval_datalog(p, edges((1, 2), (3, 1)))) == {(1, "hot"), (3, "hot")}
    seed = Program(p.rules, "Seed")
    assert tuples(eval_datalog(seed, edges())) == {(7,)}


def test_static_errors():
    with pytest.raises(UnsafeRule):
        eval_datalog(Program((Rule(Atom("P", (X, Y)), (Atom("E", (X, X)),)),), "P"), edges())
    with pytest.raises(TypeMismatch):
        eval_datalog(Program((Rule(Atom("P", (X,)), (Atom("E", (X, 9)),)),), "P"), edges())
    with pytest.raises(TypeMismatch):
        eval_datalog(Program((Rule(Atom("P", (X,)), (Atom("Col", (Y, X)), Atom("E", (X, Y)))),), "P"), edges())
    with pytest.raises(TypeMismatch):
        eval_datalog(Program((Rule(Atom("P", (X,)), (Atom("E", (X,)),)),), "P"), edges())
    with pytest.raises(TypeMismatch):
        eval_datalog(Program((Rule(Atom("E", (X, Y)), (Atom("E", (Y, X)),)),), "E"), edges())
    with pytest.raises(TypeMismatch):
        eval_datalog(Program((Rule(Atom("P", (X,)), (Atom("Q", (X,)),)),), "P"), edges())


# -- brute-force least-model oracle ------------------------------------------


def least_model(rules, edb: dict[str, set]) -> dict[str, set]:
    """Iterate immediate consequences over every assignment into the active domain."""
    adom = sorted({v for ts in edb.values() for t in ts for v in t} | {
        t for r in rules for a in (r.head, *r.body) for t in a.terms if not isinstance(t, Var)
    })
    facts = {k: set(v) for k, v in edb.items()}
    for r in rules:
        facts.setdefault(r.head.relation, set())
    while True:
        new = {k: set(v) for k, v in facts.items()}
        for r in rules:
            names = sorted({t.name for a in (r.head, *r.body) for t in a.terms if isinstance(t, Var)})
            for vals in itertools.product(adom, repeat=len(names)):
                env = dict(zip(names, vals))
                ground = lambda a: tuple(env[t.name] if isinstance(t, Var) else t for t in a.terms)  # noqa: E731
                if all(ground(a) in facts.get(a.relation, ()) for a in r.body):
                    new[r.head.relation].add(ground(r.head))
        if new == facts:
            return facts
        facts = new


def random_program(rng: random.Random) -> Program:
    vars_ = [X, Y, Z]
    rels = {"E": 2, "P": 2, "Q": 1}
    rules = []
    for _ in range(rng.randint(1, 4)):
        head_rel = rng.choice(["P", "Q"])
        body = []
        for _ in range(rng.randint(1, 3)):
            rel = rng.choice(list(rels))
            body.append(Atom(rel, tuple(rng.choice(vars_) if rng.random() < 0.85 else rng.randint(0, 3) for _ in range(rels[rel]))))
        bvars = sorted({t.name for a in body for t in a.terms if isinstance(t, Var)})
        if not bvars:
            continue
        head = Atom(head_rel, tuple(Var(rng.choice(bvars)) for _ in range(rels[head_rel])))
        rules.append(Rule(head, tuple(body)))
    # make sure both IDB relations get an integer domain
    rules.append(Rule(Atom("P", (X, Y)), (Atom("E", (X, Y)),)))
    rules.append(Rule(Atom("Q", (X,)), (Atom("E", (X, X)),)))
    return Program(tuple(rules), rng.choice(["P", "Q"]))


def random_edges(rng):
    return {(rng.randint(0, 3), rng.randint(0, 3)) for _ in range(rng.randint(0, 7))}


@given(st.integers(0, 2**32))
@settings(max_examples=80, deadline=None)
def test_matches_least_model_oracle(seed):
    rng = random.Random(seed)
    prog = random_program(rng)
    es = random_edges(rng)
    model = least_model(prog.rules, {"E": es})
    d = edges(*es)
    assert tuples(eval_datalog(prog, d)) == model[prog.output]
    assert eval_datalog(prog, d, method="naive") == eval_datalog(prog, d)


@given(st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_monotone_in_the_input(seed):
    rng = random.Random(seed)
    prog = random_program(rng)
    small = random_edges(rng)
    big = small | random_edges(rng)
    assert tuples(eval_datalog(prog, edges(*small))) <= tuples(eval_datalog(prog, edges(*big)))


@given(st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_stages_inflationary_and_bounded(seed):
    rng = random.Random(seed)
    prog = random_program(rng)
    d = edges(*random_edges(rng))
    seq = list(stages(prog, d, "naive"))
    assert seq == list(stages(prog, d, "seminaive"))
    for a, b in zip(seq, seq[1:]):
        assert all(a[k] <= b[k] for k in a)
    assert len(seq) - 1 <= stage_bound(prog, d)


@given(st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_nonrecursive_rule_equals_algebra(seed):
    rng = random.Random(seed)
    prog = random_program(rng)
    edb_rules = [r for r in prog.rules if all(a.relation == "E" for a in r.body)]
    rule = rng.choice(edb_rules)
    head_vars = [t.name for t in rule.head.terms]
    if len(set(head_vars)) != len(head_vars):
        return
    d = edges(*random_edges(rng))
    via_algebra = evaluate(rule_to_algebra(rule, SCHEMA), d)
    direct = eval_datalog(Program((rule,), rule.head.relation), d)
    assert tuples(via_algebra) == tuples(direct)
    assert all(m == 1 for _, m in via_algebra.items())


def test_tc_matches_reachability_oracle(rng):
    for _ in range(30):
        es = random_edges(rng)
        assert tuples(eval_datalog(TC, edges(*es))) == O.reachable_pairs(es)
