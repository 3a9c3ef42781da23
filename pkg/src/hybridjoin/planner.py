"""Plan enumeration and dynamic-programming optimisation over WCO and hybrid plans."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

from .catalogue import Catalogue
from .cost_model import DEFAULT_WEIGHTS, CostModel, CostWeights
from .plans import HashJoin, Node, Plan, count_joins, make_extend, make_hash_join, make_scan
from .query import QueryGraph, project

log = logging.getLogger(__name__)

LARGE_QUERY = 10
DEFAULT_BEAM = 5
SPECTRUM_MAX_VERTICES = 7


class GuardExceeded(RuntimeError):
    """Raised when an exhaustive enumeration is refused for its size."""


def _rank(cm: CostModel, node: Node) -> tuple:
    return (cm.cost(node), count_joins(node), node.vertices, node.signature())


def connected_subsets(q: QueryGraph, k: int) -> list[frozenset]:
    return [frozenset(c) for c in itertools.combinations(q.names, k) if q.is_connected(c)]


def wco_orderings(q: QueryGraph) -> list[tuple[str, ...]]:
    """Connected vertex orderings, one per unordered choice of the first two vertices.

    The scan emits both endpoints at once, so orderings differing only in
    the order of their first two vertices give the same plan.
    """
    names = q.names
    order = {n: i for i, n in enumerate(names)}
    adj = {n: set() for n in names}
    for s, d, _ in q.edges:
        adj[s].add(d)
        adj[d].add(s)
    out = []

    def grow(prefix, chosen):
        if len(prefix) == len(names):
            out.append(tuple(prefix))
            return
        for n in names:
            if n not in chosen and adj[n] & chosen:
                prefix.append(n)
                chosen.add(n)
                grow(prefix, chosen)
                chosen.discard(n)
                prefix.pop()

    for a, b in itertools.combinations(names, 2):
        if b in adj[a]:
            a, b = sorted((a, b), key=order.__getitem__)
            grow([a, b], {a, b})
    return out


def wco_plan(q: QueryGraph, qvo) -> Plan:
    """The WCO plan that matches ``qvo[:2]`` with a scan and extends one vertex at a time."""
    qvo = tuple(qvo)
    if sorted(qvo) != sorted(q.names):
        raise ValueError("ordering must list every query vertex once")
    node: Node = make_scan(q, qvo[:2])
    for v in qvo[2:]:
        node = make_extend(q, node, v)
    return Plan(q, node)


@dataclass
class RankedPlan:
    plan: Plan
    cost: float

    def __iter__(self):
        return iter((self.plan, self.cost))


def enumerate_wco_plans(q: QueryGraph, cat: Catalogue, w: CostWeights = DEFAULT_WEIGHTS,
                        cost_model: CostModel | None = None, **kw) -> list[RankedPlan]:
    """Every WCO plan of ``q`` with its estimated cost, cheapest first."""
    cm = cost_model or CostModel(q, cat, w, **kw)
    plans = [wco_plan(q, o) for o in wco_orderings(q)]
    plans.sort(key=lambda p: _rank(cm, p.root))
    return [RankedPlan(p, cm.cost(p.root)) for p in plans]


def join_splits(q: QueryGraph, subset: frozenset):
    """Unordered pairs ``(S1, S2)`` that a Hash-Join may combine into ``subset``.

    Both sides are connected, share a vertex, have at least three vertices
    and jointly cover every edge of the projection. Equivalently, the
    vertices only in S1 and those only in S2 are non-empty and never adjacent.
    """
    names = sorted(subset)
    adj = {n: set() for n in names}
    for s, d, _ in project(q, subset).edges:
        adj[s].add(d)
        adj[d].add(s)
    seen = set()
    for ka in range(1, len(names) - 2):
        for a in itertools.combinations(names, ka):
            a = frozenset(a)
            free = [n for n in names if n not in a and not (adj[n] & a)]
            s2 = subset - a
            if len(s2) < 3 or not q.is_connected(s2):
                continue
            for kb in range(1, len(free) + 1):
                for b in itertools.combinations(free, kb):
                    s1 = subset - frozenset(b)
                    if len(s1) < 3 or not (s1 & s2) or not q.is_connected(s1):
                        continue
                    pair = frozenset((s1, s2))
                    if pair not in seen:
                        seen.add(pair)
                        yield tuple(sorted((s1, s2), key=lambda x: sorted(x)))


def valid_split(q: QueryGraph, s1: frozenset, s2: frozenset) -> bool:
    """Whether a Hash-Join of plans for ``s1`` and ``s2`` is allowed."""
    if len(s1) < 3 or len(s2) < 3 or not (s1 & s2) or s1 <= s2 or s2 <= s1:
        return False
    if not (q.is_connected(s1) and q.is_connected(s2)):
        return False
    union = s1 | s2
    return all({s, d} <= s1 or {s, d} <= s2 for s, d, _ in q.edges if {s, d} <= union)


def _join(q: QueryGraph, cm: CostModel, a: Node, b: Node) -> HashJoin:
    ca, cb = cm.card(a.subset), cm.card(b.subset)
    build, probe = (a, b) if ca <= cb else (b, a)
    return make_hash_join(q, build, probe)


def optimize(q: QueryGraph, cat: Catalogue, w: CostWeights = DEFAULT_WEIGHTS, *,
             cost_model: CostModel | None = None, **kw) -> Plan:
    """Cheapest plan found by dynamic programming over connected sub-queries.

    Each sub-query keeps one plan: the best of (i) the cheapest WCO plan for
    it, (ii) extending the best plan of a sub-query one vertex smaller, and
    (iii) a Hash-Join of two smaller best plans. Queries above ``LARGE_QUERY``
    vertices go to :func:`optimize_large`.
    """
    if len(q) > LARGE_QUERY:
        return optimize_large(q, cat, w, cost_model=cost_model, **kw)
    cm = cost_model or CostModel(q, cat, w, **kw)
    if len(q) == 2:
        return Plan(q, make_scan(q, q.names))
    best: dict[frozenset, Node] = {}

    def offer(node: Node) -> None:
        cur = best.get(node.subset)
        if cur is None or _rank(cm, node) < _rank(cm, cur):
            best[node.subset] = node

    for o in wco_orderings(q):
        node: Node = make_scan(q, o[:2])
        offer(node)
        for v in o[2:]:
            node = make_extend(q, node, v)
            offer(node)
    for k in range(3, len(q) + 1):
        for s in connected_subsets(q, k):
            for v in sorted(s):
                rest = s - {v}
                if rest in best:
                    offer(make_extend(q, best[rest], v))
            for s1, s2 in join_splits(q, s):
                if s1 in best and s2 in best:
                    offer(_join(q, cm, best[s1], best[s2]))
    return Plan(q, best[frozenset(q.names)])


def optimize_large(q: QueryGraph, cat: Catalogue, w: CostWeights = DEFAULT_WEIGHTS, *,
                   beam: int | None = DEFAULT_BEAM, cost_model: CostModel | None = None,
                   trace: dict | None = None, **kw) -> Plan:
    """Level-wise dynamic programming keeping ``beam`` sub-queries per size.

    ``beam=None`` keeps every sub-query. No standalone WCO enumeration is
    done, so extensions only build on retained sub-queries. When ``trace``
    is given it receives the number of retained sub-queries per level.
    """
    cm = cost_model or CostModel(q, cat, w, **kw)
    if len(q) == 2:
        return Plan(q, make_scan(q, q.names))
    levels: dict[int, dict[frozenset, Node]] = {}
    scans = {}
    for s, d, _ in q.sorted_edges():
        pair = frozenset((s, d))
        scans.setdefault(pair, make_scan(q, pair))
    levels[2] = _prune(cm, scans, beam)
    retained: dict[frozenset, Node] = dict(levels[2])
    names = q.names
    for k in range(3, len(q) + 1):
        cand: dict[frozenset, Node] = {}

        def offer(node: Node) -> None:
            cur = cand.get(node.subset)
            if cur is None or _rank(cm, node) < _rank(cm, cur):
                cand[node.subset] = node

        for sub, node in levels[k - 1].items():
            for v in names:
                if v not in sub and q.is_connected(sub | {v}):
                    offer(make_extend(q, node, v))
        small = [s for s in retained if len(s) >= 3]
        for s1, s2 in itertools.combinations(small, 2):
            if len(s1 | s2) == k and valid_split(q, s1, s2):
                offer(_join(q, cm, retained[s1], retained[s2]))
        levels[k] = _prune(cm, cand, beam if k < len(q) else None)
        retained.update(levels[k])
    if trace is not None:
        trace.update({k: len(v) for k, v in levels.items()})
    return Plan(q, levels[len(q)][frozenset(names)])


def _prune(cm: CostModel, nodes: dict[frozenset, Node], beam: int | None) -> dict[frozenset, Node]:
    if beam is None or len(nodes) <= beam:
        return nodes
    ranked = sorted(nodes.values(), key=lambda n: (cm.cost(n), cm.card(n.subset), n.vertices))
    return {n.subset: n for n in ranked[:beam]}


def all_plans(q: QueryGraph, subset: frozenset, cm: CostModel, memo: dict) -> list[Node]:
    """Every plan for the projection on ``subset``."""
    if subset in memo:
        return memo[subset]
    out: list[Node] = []
    if len(subset) == 2:
        out.append(make_scan(q, subset))
    else:
        for v in sorted(subset):
            rest = subset - {v}
            if q.is_connected(rest):
                for child in all_plans(q, rest, cm, memo):
                    out.append(make_extend(q, child, v))
        for s1, s2 in join_splits(q, subset):
            for a in all_plans(q, s1, cm, memo):
                for b in all_plans(q, s2, cm, memo):
                    out.append(_join(q, cm, a, b))
    memo[subset] = out
    return out


def enumerate_spectrum(q: QueryGraph, cat: Catalogue, w: CostWeights = DEFAULT_WEIGHTS, *,
                       force: bool = False, max_vertices: int = SPECTRUM_MAX_VERTICES,
                       cost_model: CostModel | None = None, **kw) -> list[RankedPlan]:
    """Every WCO and hybrid plan of ``q`` with its estimated cost, cheapest first.

    Raises GuardExceeded for queries above ``max_vertices`` unless ``force``.
    """
    if len(q) > max_vertices and not force:
        raise GuardExceeded(f"spectrum of a {len(q)}-vertex query is too large; use force to override")
    cm = cost_model or CostModel(q, cat, w, **kw)
    roots = all_plans(q, frozenset(q.names), cm, {})
    roots.sort(key=lambda n: _rank(cm, n))
    return [RankedPlan(Plan(q, n), cm.cost(n)) for n in roots]
