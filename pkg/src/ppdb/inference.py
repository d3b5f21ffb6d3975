"""Query semantics over PDBs: exact push-forward on finite PDBs, Monte Carlo
estimates for samplers, and the marginal-based queries built on top
(threshold, top-k) plus conditioning.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from statistics import NormalDist
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .algebra import evaluate, infer_schema
from .errors import PartitionOverlap, ZeroProbabilityCondition
from .instances import BagInstance
from .pdb import (
    CountingEvent,
    Event,
    FinitePdb,
    FiniteSampler,
    exact_event_probability,
)
from .schema import Schema
from .sets import FactSetExpr, intersects, set_from_json, set_to_json

DEFAULT_LEVEL = 0.95


# -- estimates --------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    n: int
    ci: tuple[float, float]
    level: float
    seed: int
    hits: int = 0

    def to_json(self) -> dict:
        return {"p_hat": self.p_hat, "n": self.n, "ci": list(self.ci), "level": self.level, "seed": self.seed}


def wilson_interval(hits: int, n: int, level: float = DEFAULT_LEVEL) -> tuple[float, float]:
    if n < 1:
        raise ValueError("need at least one sample")
    if not 0 < level < 1:
        raise ValueError("confidence level must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = hits / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, min(p, centre - half))
    hi = 1.0 if hits == n else min(1.0, max(p, centre + half))
    return lo, hi


def make_estimate(hits: int, n: int, level: float, seed: int) -> Estimate:
    return Estimate(hits / n, n, wilson_interval(hits, n, level), level, seed, hits)


# -- exact push-forward -----------------------------------------------------


def output_distribution(pdb: FinitePdb, query) -> FinitePdb:
    """The image PDB of ``query``: worlds ``Q(D)`` with the summed probabilities."""
    out = infer_schema(query, pdb.schema)
    return FinitePdb(out, ((evaluate(query, inst), p) for inst, p in pdb.worlds))


def pushforward_exact(pdb: FinitePdb, query, event: Event) -> Fraction:
    """P(Q^{-1}(E)) summed over the worlds, in exact rational arithmetic."""
    event.check(infer_schema(query, pdb.schema))
    total = Fraction(0)
    for inst, p in pdb.worlds:
        if event.holds(evaluate(query, inst)):
            total += p
    return total


# -- Monte Carlo ------------------------------------------------------------


def _sampler(pdb):
    return pdb.mirror() if isinstance(pdb, FinitePdb) else pdb


def _chunk_hits(args) -> list[int]:
    sampler, query, events, seed, start, stop = args
    hits = [0] * len(events)
    for i in range(start, stop):
        out = evaluate(query, sampler.sample(seed, i))
        for j, ev in enumerate(events):
            if ev.holds(out):
                hits[j] += 1
    return hits


def mc_hits(pdb, query, events: Sequence[Event], samples: int, seed: int, threads: int = 1) -> list[int]:
    """Number of draws ``i < samples`` whose query output lies in each event.

    Finite-support samplers evaluate each world once and count selections
    with a vectorized draw.  Other samplers evaluate draw by draw; with
    ``threads > 1`` the index range is split into chunks whose integer counts
    are summed, so the result does not depend on the worker count.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    sampler = _sampler(pdb)
    out_schema = infer_schema(query, sampler.schema)
    for ev in events:
        ev.check(out_schema)
    if isinstance(sampler, FiniteSampler):
        table = np.array(
            [[ev.holds(evaluate(query, inst)) for ev in events] for inst, _ in sampler.pdb.worlds], dtype=np.int64
        ).reshape(len(sampler.pdb.worlds), len(events))
        per_world = np.zeros(len(sampler.pdb.worlds), dtype=np.int64)
        step = 1 << 20
        for start in range(0, samples, step):
            idx = sampler.world_indices(seed, start, min(step, samples - start))
            per_world += np.bincount(idx, minlength=len(per_world))
        return [int(x) for x in per_world @ table]
    if threads <= 1 or samples < 2 * threads:
        return _chunk_hits((sampler, query, list(events), seed, 0, samples))
    bounds = np.linspace(0, samples, threads + 1).astype(int)
    jobs = [(sampler, query, list(events), seed, int(a), int(b)) for a, b in zip(bounds, bounds[1:])]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(_chunk_hits, jobs))
    return [sum(col) for col in zip(*parts)]


def pushforward_mc(
    pdb, query, event: Event, samples: int, seed: int, level: float = DEFAULT_LEVEL, threads: int = 1
) -> Estimate:
    (hits,) = mc_hits(pdb, query, [event], samples, seed, threads)
    return make_estimate(hits, samples, level, seed)


# -- partitions and marginals -----------------------------------------------


@dataclass(frozen=True)
class Cell:
    label: str
    fact_set: FactSetExpr


REMAINDER = "(remainder)"


class Partition:
    """Pairwise-disjoint labelled cells; the rest of the fact space is the remainder."""

    def __init__(self, cells: Iterable[Cell | tuple[str, FactSetExpr] | FactSetExpr]):
        out = []
        for i, c in enumerate(cells):
            if isinstance(c, FactSetExpr):
                c = Cell(f"cell{i}", c)
            elif not isinstance(c, Cell):
                c = Cell(*c)
            out.append(c)
        labels = [c.label for c in out]
        if len(set(labels)) != len(labels):
            raise ValueError("cell labels must be distinct")
        if REMAINDER in labels:
            raise ValueError(f"{REMAINDER!r} is reserved")
        self.cells: tuple[Cell, ...] = tuple(out)

    def __iter__(self):
        return iter(self.cells)

    def __len__(self):
        return len(self.cells)

    def validate(self, schema: Schema) -> None:
        """Raise :class:`PartitionOverlap` naming a shared fact if two cells meet."""
        for a, b in combinations(self.cells, 2):
            w = intersects(a.fact_set, b.fact_set, schema)
            if w is not None:
                raise PartitionOverlap(f"cells {a.label!r} and {b.label!r} share the fact {w}")

    def remainder(self) -> Cell:
        covered = FactSetExpr.empty()
        for c in self.cells:
            covered = covered.union(c.fact_set)
        return Cell(REMAINDER, covered.complement())

    def to_json(self) -> dict:
        return {"cells": [{"label": c.label, "set": set_to_json(c.fact_set)} for c in self.cells]}


def partition_from_json(obj: Mapping[str, Any] | Sequence) -> Partition:
    cells = obj["cells"] if isinstance(obj, Mapping) else obj
    out = []
    for i, c in enumerate(cells):
        if "set" in c:
            out.append(Cell(c.get("label", f"cell{i}"), set_from_json(c["set"])))
        else:
            out.append(Cell(f"cell{i}", set_from_json(c)))
    return Partition(out)


def _hit(cell: Cell) -> CountingEvent:
    return CountingEvent(cell.fact_set, ">", 0)


def marginals(
    pdb,
    query,
    partition: Partition,
    *,
    samples: int = 10_000,
    seed: int = 0,
    level: float = DEFAULT_LEVEL,
    threads: int = 1,
    include_remainder: bool = False,
) -> list[tuple[Cell, Fraction | Estimate]]:
    """Per cell, the probability that the query output has a fact in it.

    Exact (``Fraction``) for a :class:`FinitePdb`, an :class:`Estimate` for
    samplers.  All cells are estimated from the same draws.
    """
    out_schema = infer_schema(query, pdb.schema)
    partition.validate(out_schema)
    cells = list(partition.cells)
    if include_remainder:
        cells.append(partition.remainder())
    if isinstance(pdb, FinitePdb):
        return [(c, pushforward_exact(pdb, query, _hit(c))) for c in cells]
    hits = mc_hits(pdb, query, [_hit(c) for c in cells], samples, seed, threads)
    return [(c, make_estimate(h, samples, level, seed)) for c, h in zip(cells, hits)]


@dataclass(frozen=True)
class ThresholdResult:
    included: list
    excluded: list
    undecided: list

    @property
    def cells(self) -> list[Cell]:
        return [c for c, _ in self.included]


def threshold_query(pdb, query, partition: Partition, alpha: float | Fraction, **mc) -> ThresholdResult:
    """Cells with marginal at least ``alpha``.

    Exact marginals decide directly.  Estimated marginals decide ``in`` when
    the interval's lower end is at least ``alpha``, ``out`` when its upper end
    is below ``alpha`` and stay undecided otherwise.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    inc, exc, und = [], [], []
    for cell, v in marginals(pdb, query, partition, **mc):
        if isinstance(v, Estimate):
            if v.ci[0] >= alpha:
                inc.append((cell, v))
            elif v.ci[1] < alpha:
                exc.append((cell, v))
            else:
                und.append((cell, v))
        else:
            (inc if v >= Fraction(alpha) else exc).append((cell, v))
    return ThresholdResult(inc, exc, und)


@dataclass(frozen=True)
class Ranked:
    cell: Cell
    value: Fraction | Estimate
    overlaps: tuple[str, ...] = ()


def _point(v) -> float | Fraction:
    return v.p_hat if isinstance(v, Estimate) else v


def topk_query(pdb, query, partition: Partition, k: int, **mc) -> list[Ranked]:
    """The ``k`` cells of largest marginal; ties go to the smaller label.

    For estimates each entry lists the labels of all other cells whose
    confidence interval overlaps its own.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    ms = marginals(pdb, query, partition, **mc)
    ranked = sorted(ms, key=lambda cv: (-_point(cv[1]), cv[0].label))
    out = []
    for cell, v in ranked[:k]:
        ov: tuple[str, ...] = ()
        if isinstance(v, Estimate):
            ov = tuple(
                c.label for c, w in ranked if c is not cell and w.ci[0] <= v.ci[1] and v.ci[0] <= w.ci[1]
            )
        out.append(Ranked(cell, v, ov))
    return out


# -- conditioning -----------------------------------------------------------


def condition(pdb: FinitePdb, event: Event) -> FinitePdb:
    """Keep the worlds in ``event`` and rescale them by ``1 / P(event)``."""
    p = exact_event_probability(pdb, event)
    if p == 0:
        raise ZeroProbabilityCondition("cannot condition on an event of probability 0")
    return FinitePdb(pdb.schema, ((inst, q / p) for inst, q in pdb.worlds if event.holds(inst)))


# -- separation demo --------------------------------------------------------


def event_probabilities(pdb: FinitePdb) -> set[Fraction]:
    """Probabilities of all events of a finite PDB (subset sums over the worlds)."""
    sums = {Fraction(0)}
    for _, p in pdb.worlds:
        sums |= {s + p for s in sums}
    return sums


def trivially_uniform(pdb: FinitePdb) -> bool:
    """A PDB with a single positive-probability world: every view on it is uniformly local."""
    return sum(1 for _, p in pdb.worlds if p > 0) == 1


@dataclass
class DemoReport:
    lines: list[str]
    threshold_separated: bool
    conditioning_separated: bool

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _demo_schema() -> Schema:
    from .schema import Categorical

    return Schema({"A": Categorical(("f", "g"))}, {"R": ("A",)})


def demo_pdbs():
    """``(schema, f, f', Δ₁, Δ₂)``: Δ₁ is the point mass on ⦃f⦄, Δ₂ is uniform on ⦃f⦄, ⦃f'⦄."""
    from .instances import Fact

    schema = _demo_schema()
    f, g = Fact("R", ("f",)), Fact("R", ("g",))
    bag_f = BagInstance(schema, {f: 1})
    bag_g = BagInstance(schema, {g: 1})
    d1 = FinitePdb(schema, [(bag_f, 1)])
    d2 = FinitePdb(schema, [(bag_f, Fraction(1, 2)), (bag_g, Fraction(1, 2))])
    return schema, f, g, d1, d2


def threshold_outputs(alpha: Fraction = Fraction(1)):
    """The deterministic threshold-query outputs on the two demo PDBs."""
    from .sets import Equals

    schema, f, g, d1, d2 = demo_pdbs()
    part = Partition(
        [Cell("f", FactSetExpr.of("R", Equals("A", "f"))), Cell("g", FactSetExpr.of("R", Equals("A", "g")))]
    )
    return [c.label for c in threshold_query(d1, None, part, alpha).cells], [
        c.label for c in threshold_query(d2, None, part, alpha).cells
    ]


def conditioning_demo():
    """Three worlds (1/6, 1/2, 1/3); condition on the first two."""
    from .instances import Fact
    from .schema import IntegerRange
    from .sets import Interval

    schema = Schema({"A": IntegerRange(1, 3)}, {"R": ("A",)})
    worlds = [BagInstance(schema, {Fact("R", (i,)): 1}) for i in (1, 2, 3)]
    pdb = FinitePdb(schema, zip(worlds, (Fraction(1, 6), Fraction(1, 2), Fraction(1, 3))))
    ev = CountingEvent(FactSetExpr.of("R", Interval("A", 1, 2)), "==", 1)
    cond = condition(pdb, ev)
    return pdb, cond, cond.probability_of(worlds[0])


def classify_demo(pdb: FinitePdb | None = None) -> DemoReport:
    """Witness the two separations and, given a PDB, note the one-world case."""
    lines = []
    alpha = Fraction(1)
    out1, out2 = threshold_outputs(alpha)
    lines.append(f"threshold query, alpha = {alpha}:")
    lines.append(f"  on Δ₁ (⦃f⦄ w.p. 1): {out1}")
    lines.append(f"  on Δ₂ (⦃f⦄, ⦃f'⦄ w.p. 1/2 each): {out2}")
    sep1 = out1 != out2
    if sep1:
        lines.append("  type II witnessed: outputs on ⦃f⦄ differ across Δ₁, Δ₂")
        lines.append("  ⦃f⦄ has positive probability in both, so no single instance map explains both: not type III")
    base, cond, p1 = conditioning_demo()
    reachable = event_probabilities(base)
    sep2 = p1 == Fraction(1, 4) and p1 not in reachable
    lines.append("conditioning on the first two of three worlds (1/6, 1/2, 1/3):")
    lines.append(f"  conditioned probability of the first world: {p1}")
    lines.append(f"  event probabilities of the original PDB: {', '.join(str(x) for x in sorted(reachable))}")
    if sep2:
        lines.append("  no event has probability 1/4: not type II")
    if pdb is not None and trivially_uniform(pdb):
        lines.append("given PDB has a single world: every query is trivially type III")
    return DemoReport(lines, sep1, sep2)
