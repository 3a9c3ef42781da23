"""Subgraph query evaluation with worst-case optimal, binary-join and hybrid plans."""

from .catalogue import (Catalogue, CatalogueEntry, build_catalogue, estimate_cardinality, estimate_extension,
                        load_catalogue, save_catalogue)
from .cost_model import CostModel, CostWeights, PlanCost, calibrate_weights, cost_hash_join, icost_extend, plan_cost
from .executor import (ExecResult, ExecStats, adaptive_route, cached_intersect, execute, execute_parallel,
                       intersect, make_adaptive, reestimate, stream)
from .graph_store import Graph, load_graph, neighbors, sample_edges
from .oracle import brute_force_count, brute_force_matches, q_error
from .planner import enumerate_spectrum, enumerate_wco_plans, optimize, optimize_large, wco_plan
from .plans import Plan, explain
from .query import QueryGraph, canonicalize, make_query, parse_query, project

__version__ = "0.1.0"

__all__ = [
    "adaptive_route", "brute_force_count", "brute_force_matches", "build_catalogue",
    "cached_intersect", "calibrate_weights", "canonicalize", "Catalogue", "CatalogueEntry",
    "cost_hash_join", "CostModel", "CostWeights", "enumerate_spectrum", "enumerate_wco_plans",
    "estimate_cardinality", "estimate_extension", "ExecResult", "ExecStats", "execute",
    "execute_parallel", "explain", "Graph", "icost_extend", "intersect", "load_catalogue",
    "load_graph", "make_adaptive", "make_query", "neighbors", "optimize", "optimize_large",
    "parse_query", "Plan", "plan_cost", "PlanCost", "project", "q_error", "QueryGraph",
    "reestimate", "sample_edges", "save_catalogue", "stream", "wco_plan",
]
