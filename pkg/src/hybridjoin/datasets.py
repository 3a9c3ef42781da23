"""Small graphs and query shapes used by the demos, tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .graph_store import Graph
from .query import QueryGraph, make_query

# Query shapes; vertex names follow a1..am.
SHAPES: dict[str, list[tuple[int, int]]] = {
    "Q1": [(1, 2), (1, 3), (2, 3)],
    "Q2": [(1, 2), (1, 3), (2, 4), (3, 4)],
    "Q3": [(1, 2), (1, 3), (2, 4), (4, 3)],
    "Q4": [(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)],
    "Q5": [(1, 2), (1, 3), (2, 3), (2, 4), (4, 3)],
    "Q6": [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)],
    "Q7": [(i, j) for i in range(1, 6) for j in range(i + 1, 6)],
    "Q8": [(1, 2), (1, 3), (2, 3), (3, 4), (3, 5), (4, 5)],
    "Q9": [(1, 2), (2, 3), (3, 1), (3, 4), (4, 5), (5, 3), (6, 2), (6, 5)],
    "Q10": [(1, 2), (1, 3), (2, 4), (3, 4), (4, 5), (4, 6), (5, 6)],
    "Q11": [(1, 2), (1, 3), (1, 4), (5, 1)],
    "Q12": [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)],
    "Q13": [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6)],
    "Q14": [(i, j) for i in range(1, 8) for j in range(i + 1, 8)],
}

ASYMMETRIC_TRIANGLE = [(1, 2), (2, 3), (1, 3)]
SYMMETRIC_TRIANGLE = [(1, 2), (2, 3), (3, 1)]
DIAMOND_X = SHAPES["Q4"]
SYMMETRIC_DIAMOND_X = [(1, 2), (2, 3), (3, 1), (3, 4), (4, 2)]


def shape(edges, *, vertex_labels=None, edge_labels=None) -> QueryGraph:
    """Query over ``a1..am`` from integer edge pairs.

    ``vertex_labels`` maps vertex number to label, ``edge_labels`` is a list
    aligned with ``edges``; both default to the unlabelled label.
    """
    named = []
    for i, (s, d) in enumerate(edges):
        e = (f"a{s}", f"a{d}")
        if edge_labels is not None:
            e = e + (edge_labels[i],)
        named.append(e)
    labels = {f"a{k}": v for k, v in (vertex_labels or {}).items()}
    return make_query(named, labels)


def named_query(name: str, **kw) -> QueryGraph:
    return shape(SHAPES[name], **kw)


def g0(label: str = "P", edge_label: str = "E") -> Graph:
    """Four vertices, edges 0->1, 0->2, 1->2, 1->3, 2->3."""
    return Graph.from_edges([label] * 4, [(0, 1, edge_label), (0, 2, edge_label), (1, 2, edge_label),
                                          (1, 3, edge_label), (2, 3, edge_label)])


def triads(n: int) -> Graph:
    """``n`` disjoint triads x->y (dotted), x->z (solid), z->y (dashed)."""
    edges = []
    for t in range(n):
        x, y, z = 3 * t, 3 * t + 1, 3 * t + 2
        edges += [(x, y), (x, z), (z, y)]
    return Graph.from_edges(["_"] * (3 * n), edges)


def random_graph(n: int, density: float, *, vertex_labels=("_",), edge_labels=("_",),
                 seed: int = 0, self_loops: bool = False) -> Graph:
    """Directed Erdos-Renyi graph with uniformly random labels."""
    rng = np.random.default_rng(seed)
    vl = [vertex_labels[i] for i in rng.integers(0, len(vertex_labels), size=n)]
    mask = rng.random((n, n)) < density
    if not self_loops:
        np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    el = rng.integers(0, len(edge_labels), size=len(src))
    return Graph.from_edges(vl, [(int(s), int(d), edge_labels[int(e)]) for s, d, e in zip(src, dst, el)])


def clustered_graph(n: int, triangles: int, extra_edges: int, *, seed: int = 0,
                    vertex_labels=("_",), edge_labels=("_",)) -> Graph:
    """Random directed graph with planted triangles sharing hub-like endpoints.

    Triangles are planted around a small pool of edges so that many triangles
    reuse the same ``u->v`` pair, which is what gives an intersection cache
    something to reuse.
    """
    rng = np.random.default_rng(seed)
    edges = set()
    pairs = max(1, triangles // 8)
    bases = []
    while len(bases) < pairs:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v:
            bases.append((u, v))
            edges.add((u, v))
    for _ in range(triangles):
        u, v = bases[int(rng.integers(0, len(bases)))]
        w = int(rng.integers(0, n))
        if w in (u, v):
            continue
        edges.update({(u, w), (v, w)} if rng.random() < 0.5 else {(u, w), (w, v)})
    while len(edges) < triangles + extra_edges:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v:
            edges.add((u, v))
    vl = [vertex_labels[i] for i in rng.integers(0, len(vertex_labels), size=n)]
    out = sorted(edges)
    el = rng.integers(0, len(edge_labels), size=len(out))
    return Graph.from_edges(vl, [(u, v, edge_labels[int(e)]) for (u, v), e in zip(out, el)])


def skewed_graph(n: int, m: int, *, alpha: float = 1.6, min_out: int = 0, seed: int = 0) -> Graph:
    """Power-law out-degrees, near-uniform in-degrees, ``m`` distinct edges.

    ``min_out`` first gives every vertex that many uniformly chosen out-edges,
    so no adjacency list on the forward side is empty.
    """
    rng = np.random.default_rng(seed)
    edges = set()
    for s in range(n if min_out else 0):
        others = rng.choice(n - 1, size=min(min_out, n - 1), replace=False)
        edges.update((s, int(d) + (d >= s)) for d in others)
    weights = 1.0 / np.arange(1, n + 1) ** alpha
    weights /= weights.sum()
    while len(edges) < m:
        need = m - len(edges)
        src = rng.choice(n, size=need * 2, p=weights)
        dst = rng.integers(0, n, size=need * 2)
        for s, d in zip(src.tolist(), dst.tolist()):
            if s != d:
                edges.add((s, d))
                if len(edges) >= m:
                    break
    return Graph.from_edges(["_"] * n, sorted(edges))


def random_walk_queries(g: Graph, count: int, size: int, *, seed: int = 0,
                        closure_prob: float = 0.3, max_tries: int = 10_000) -> list[QueryGraph]:
    """Labelled connected queries grown by random walks over ``g`` plus edge closures.

    Every query returned has at least one match in ``g`` by construction.
    """
    rng = np.random.default_rng(seed)
    out: list[QueryGraph] = []
    edges_all = [(u, v, lab) for u, v, lab in g.edges()]
    if not edges_all:
        return out
    adjacency: dict[int, list] = {}
    for u, v, lab in edges_all:
        adjacency.setdefault(u, []).append((v, lab, True))
        adjacency.setdefault(v, []).append((u, lab, False))
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        u, v, lab = edges_all[int(rng.integers(0, len(edges_all)))]
        if u == v:
            continue
        chosen = [u, v]
        qedges = {(0, 1, lab)}
        stuck = 0
        while len(chosen) < size and stuck < 50:
            a = chosen[int(rng.integers(0, len(chosen)))]
            nbrs = adjacency.get(a, [])
            w, lab2, out_dir = nbrs[int(rng.integers(0, len(nbrs)))]
            if w in chosen:
                stuck += 1
                continue
            chosen.append(w)
            ia, iw = chosen.index(a), len(chosen) - 1
            qedges.add((ia, iw, lab2) if out_dir else (iw, ia, lab2))
        if len(chosen) < size:
            continue
        for i in range(size):
            for j in range(size):
                if i == j or rng.random() >= closure_prob:
                    continue
                for u2, v2, lab3 in ((chosen[i], chosen[j], None),):
                    for name in g.edge_label_names:
                        if g.has_edge(u2, v2, name) and (j, i, name) not in qedges:
                            qedges.add((i, j, name))
                            break
        labels = {f"v{i}": g.label_of(x) for i, x in enumerate(chosen)}
        q = make_query([(f"v{s}", f"v{d}", el) for s, d, el in sorted(qedges)], labels)
        out.append(q)
    return out
