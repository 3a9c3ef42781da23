"""Plan costs in i-cost units: intersections for E/I, weighted build/probe for joins."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .catalogue import Catalogue, CardinalityEstimator
from .plans import Adaptive, Extend, HashJoin, Node, Plan, Scan, make_extend, walk
from .query import QueryGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostWeights:
    w1: float = 3.0
    w2: float = 1.0

    def __post_init__(self):
        if self.w1 <= 0 or self.w2 <= 0:
            raise ValueError("cost weights must be positive")


DEFAULT_WEIGHTS = CostWeights()


@dataclass
class PlanCost:
    total: float
    per_operator: dict[str, float] = field(default_factory=dict)
    estimated_cardinalities: dict[frozenset, float] = field(default_factory=dict)


def icost_extend(card_source: float, entry, cache_groups=None) -> float:
    """Estimated intersection work of one E/I operator.

    ``entry`` is anything with ``avg_list_sizes`` (descriptor -> average size).
    ``cache_groups`` maps a descriptor to the cardinality of the smallest
    sub-query whose tuples determine it; those lists are charged once per
    tuple of that sub-query instead of once per input tuple.
    """
    sizes = entry.avg_list_sizes if hasattr(entry, "avg_list_sizes") else entry
    total = 0.0
    for d, size in sizes.items():
        mult = card_source
        if cache_groups and d in cache_groups:
            mult = min(cache_groups[d], card_source)
        total += mult * size
    return total


def cost_hash_join(n1: float, n2: float, w: CostWeights = DEFAULT_WEIGHTS) -> float:
    """``w1 * n1 + w2 * n2``: hash ``n1`` build tuples, probe ``n2`` times."""
    return w.w1 * n1 + w.w2 * n2


def cache_anchor(node: Extend):
    """Deepest node in the E/I chain below ``node`` whose vertices cover all sources.

    Returns None when the operator cannot reuse its cache: a single
    descriptor, or a source bound by the immediate child.
    """
    if len(node.descriptors) < 2:
        return None
    sources = {d[0] for d in node.descriptors}
    anchor = None
    c = node.child
    while isinstance(c, Extend):
        c = c.child
        if sources <= c.subset:
            anchor = c
    return anchor


class CostModel:
    """Cost and cardinality estimates for the plans of one query."""

    def __init__(self, query: QueryGraph, catalogue: Catalogue, weights: CostWeights = DEFAULT_WEIGHTS,
                 *, cache_conscious: bool = True, max_reductions: int | None = None):
        self.query = query
        self.catalogue = catalogue
        self.weights = weights
        self.cache_conscious = cache_conscious
        self.estimator = CardinalityEstimator(catalogue, query, max_reductions=max_reductions)
        self._cost: dict[Node, float] = {}

    def card(self, subset) -> float:
        return self.estimator.card(subset)

    def op_cost(self, node: Node) -> float:
        if isinstance(node, Scan):
            return 0.0
        if isinstance(node, Adaptive):
            return self.cost(self._fixed_chain(node)) - self.cost(node.base)
        if isinstance(node, HashJoin):
            return cost_hash_join(self.card(node.build.subset), self.card(node.probe.subset), self.weights)
        est = self.estimator.extension(node.child.subset, node.target)
        card_in = self.card(node.child.subset)
        groups = None
        if self.cache_conscious:
            anchor = cache_anchor(node)
            if anchor is not None:
                c = self.card(anchor.subset)
                groups = {d: c for d in node.descriptors}
        return icost_extend(card_in, est, groups)

    def cost(self, node: Node) -> float:
        v = self._cost.get(node)
        if v is None:
            if isinstance(node, Scan):
                v = 0.0
            elif isinstance(node, Extend):
                v = self.cost(node.child) + self.op_cost(node)
            elif isinstance(node, Adaptive):
                v = self.cost(self._fixed_chain(node))
            else:
                v = self.cost(node.build) + self.cost(node.probe) + self.op_cost(node)
            self._cost[node] = v
        return v

    def _fixed_chain(self, node: Adaptive) -> Node:
        # an adaptive region is costed as its fixed order
        chain = node.base
        for v in node.fixed:
            chain = make_extend(self.query, chain, v)
        return chain

    def plan_cost(self, plan: Plan | Node) -> PlanCost:
        root = plan.root if isinstance(plan, Plan) else plan
        per = {}
        cards = {}
        for node in walk(root):
            per[node.signature()] = self.op_cost(node)
            cards[node.subset] = self.card(node.subset)
        return PlanCost(self.cost(root), per, cards)


def plan_cost(plan: Plan, cat: Catalogue, w: CostWeights = DEFAULT_WEIGHTS, **kw) -> PlanCost:
    return CostModel(plan.query, cat, w, **kw).plan_cost(plan)


@dataclass
class Calibration:
    weights: CostWeights
    seconds_per_icost: float | None
    degenerate: bool


def calibrate_weights(extend_samples, join_samples, default: CostWeights = DEFAULT_WEIGHTS) -> Calibration:
    """Fit ``w1, w2`` from profiled operators.

    ``extend_samples`` are ``(icost, seconds)`` pairs; ``join_samples`` are
    ``(n1, n2, seconds)`` triples. E/I samples give seconds per i-cost unit,
    which converts join times to i-cost units before a least-squares fit.
    """
    ext = np.asarray(list(extend_samples), dtype=float).reshape(-1, 2)
    joins = np.asarray(list(join_samples), dtype=float).reshape(-1, 3)
    if len(ext) < 2 or len(joins) < 2:
        return Calibration(default, None, True)
    icost, secs = ext[:, 0], ext[:, 1]
    denom = float(icost @ icost)
    if denom == 0:
        return Calibration(default, None, True)
    rate = float(icost @ secs) / denom
    if rate <= 0:
        return Calibration(default, None, True)
    target = joins[:, 2] / rate
    design = joins[:, :2]
    if np.linalg.matrix_rank(design) < 2:
        return Calibration(default, rate, True)
    (w1, w2), *_ = np.linalg.lstsq(design, target, rcond=None)
    if w1 <= 0 or w2 <= 0:
        log.warning("calibration produced non-positive weights (%g, %g); keeping defaults", w1, w2)
        return Calibration(default, rate, True)
    return Calibration(CostWeights(float(w1), float(w2)), rate, False)
