"""Brute-force matching used to check every other component."""

from __future__ import annotations

import math

from .graph_store import Graph
from .query import QueryGraph, project


class OracleGuardExceeded(RuntimeError):
    pass


ORACLE_MAX_VERTICES = 8
_INJECTIVE = {"injective": True, "isomorphism": True, "homomorphic": False, "homomorphism": False}


def _injective(semantics: str) -> bool:
    try:
        return _INJECTIVE[semantics]
    except KeyError:
        raise ValueError(f"unknown semantics {semantics!r}") from None


def _order(q: QueryGraph) -> list[str]:
    # a connected order so every vertex after the first has a matched neighbour
    names = list(q.names)
    order = [names[0]]
    while len(order) < len(names):
        for n in names:
            if n not in order and any((s == n and d in order) or (d == n and s in order) for s, d, _ in q.edges):
                order.append(n)
                break
    return order


def brute_force_matches(q: QueryGraph, g: Graph, semantics: str = "homomorphism", *, force: bool = False):
    """Yield every match as a dict from query vertex to data vertex.

    Plain backtracking over a connected vertex order. A vertex with a bound
    neighbour takes its candidates from that neighbour's edge set, otherwise
    from every data vertex with its label; each query edge is checked by
    direct lookup once both ends are bound.
    """
    injective = _injective(semantics)
    if len(q) > ORACLE_MAX_VERTICES and not force:
        raise OracleGuardExceeded(f"{len(q)}-vertex query exceeds the oracle guard")
    order = _order(q)
    labels = q.labels
    by_label = {n: set(g.vertices_with_label(labels[n]).tolist()) for n in order}
    checks: dict[str, list] = {n: [] for n in order}
    placed = set()
    for n in order:
        for s, d, el in q.edges:
            if n in (s, d) and ({s, d} - {n}) <= placed | {n}:
                checks[n].append((s, d, el))
        placed.add(n)
    edge_sets: dict[str, set] = {}
    out_adj: dict[str, dict] = {}
    in_adj: dict[str, dict] = {}
    for u, v, lab in g.edges():
        edge_sets.setdefault(lab, set()).add((u, v))
        out_adj.setdefault(lab, {}).setdefault(u, set()).add(v)
        in_adj.setdefault(lab, {}).setdefault(v, set()).add(u)
    assign: dict[str, int] = {}

    def candidates(n):
        for s, d, el in checks[n]:
            if s == n and d != n:
                return in_adj.get(el, {}).get(assign[d], set()) & by_label[n]
            if d == n and s != n:
                return out_adj.get(el, {}).get(assign[s], set()) & by_label[n]
        return by_label[n]

    def rec(i):
        if i == len(order):
            yield dict(assign)
            return
        n = order[i]
        used = set(assign.values()) if injective else ()
        for v in sorted(candidates(n)):
            if injective and v in used:
                continue
            assign[n] = v
            if all((assign[s], assign[d]) in edge_sets.get(el, ()) for s, d, el in checks[n]):
                yield from rec(i + 1)
            del assign[n]

    yield from rec(0)


def brute_force_count(q: QueryGraph, g: Graph, semantics: str = "homomorphism", *, force: bool = False) -> int:
    return sum(1 for _ in brute_force_matches(q, g, semantics, force=force))


def brute_force_tuples(q: QueryGraph, g: Graph, vertices, **kw) -> list[tuple[int, ...]]:
    """Matches as tuples in the order of ``vertices``, sorted."""
    return sorted(tuple(m[v] for v in vertices) for m in brute_force_matches(q, g, **kw))


def exact_mu(q: QueryGraph, g: Graph, base, target: str) -> float:
    """True ratio ``|matches(base + target)| / |matches(base)|``, zero when the base has none."""
    base = set(base)
    n0 = brute_force_count(project(q, base), g)
    if n0 == 0:
        return 0.0
    return brute_force_count(project(q, base | {target}), g) / n0


def q_error(estimate: float, truth: float) -> float:
    """``max(est/true, true/est)``; 1 when both are zero, infinite when only one is."""
    if estimate < 0 or truth < 0:
        raise ValueError("cardinalities must be non-negative")
    if estimate == 0 and truth == 0:
        return 1.0
    if estimate == 0 or truth == 0:
        return math.inf
    return max(estimate / truth, truth / estimate)
