"""Decomposition witnesses, searches and constructions."""

from .constructions import (
    ColumnPlan,
    compose,
    compose_search,
    composition_limit,
    fiber_compose,
    fiber_plan,
    limit_decompose,
    outer_scales,
    plan_composition,
    product_decompose,
    projection_map,
    pullback_witness,
    union_decompose,
)
from .control import ControlFunction, MapFamily, PointMap, check_controls, control_violations
from .rearrange import RearrangedArray, cell_index, cell_of, rearrange, triangular
from .search import STRATEGIES, Searcher, search_decomposition, search_uniform
from .witness import (
    DecompositionRequest,
    DecompositionWitness,
    WitnessVerdict,
    as_request,
    make_witness,
    verify_witness,
)

__all__ = [
    "ColumnPlan",
    "compose",
    "compose_search",
    "composition_limit",
    "fiber_compose",
    "fiber_plan",
    "limit_decompose",
    "outer_scales",
    "plan_composition",
    "product_decompose",
    "projection_map",
    "pullback_witness",
    "union_decompose",
    "DecompositionRequest",
    "DecompositionWitness",
    "WitnessVerdict",
    "as_request",
    "make_witness",
    "verify_witness",
    "ControlFunction",
    "MapFamily",
    "PointMap",
    "check_controls",
    "control_violations",
    "RearrangedArray",
    "cell_index",
    "cell_of",
    "rearrange",
    "triangular",
    "STRATEGIES",
    "Searcher",
    "search_decomposition",
    "search_uniform",
]
