"""Probabilistic bag databases as finite point processes over fact spaces."""

from __future__ import annotations

from .aggregates import Aggregate, Aggregator, aggregate_query, get_aggregator, group_aggregate, register_aggregator
from .algebra import (
    AdditiveUnion,
    As,
    CrossProduct,
    Dedup,
    Difference,
    EmptyConst,
    Extract,
    MaxUnion,
    MinIntersect,
    NaturalJoin,
    Project,
    Query,
    Rename,
    Select,
    SingletonConst,
    View,
    evaluate,
    infer_schema,
)
from .datalog import Atom, Program, Rule, Var, eval_datalog, eval_stage, stage_bound, stages
from .errors import *  # noqa: F401,F403
from .inference import (
    Cell,
    Estimate,
    Partition,
    classify_demo,
    condition,
    marginals,
    pushforward_exact,
    pushforward_mc,
    threshold_query,
    topk_query,
)
from .instances import BagInstance, Fact, canonicalize, count_in_set, multiplicity
from .parsing import format_pred, parse_datalog, parse_pred, parse_query
from .pdb import (
    CountingEvent,
    FinitePdb,
    PointProcessPdb,
    exact_event_probability,
    is_simple,
    pdb_from_json,
    sample_world,
)
from .schema import Categorical, IntegerAll, IntegerRange, RealInterval, Schema, schema_from_json, validate_schema
from .sets import FactSetExpr

__version__ = "0.1.0"
