"""Labelled query graphs: parsing, projection and canonical forms."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache

from .graph_store import DEFAULT_LABEL


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class QueryValidationError(ValueError):
    pass


@dataclass(frozen=True)
class QueryGraph:
    """A directed pattern with labelled vertices and edges.

    ``vertices`` keeps declaration order, which is the internal total order
    used when a vertex ordering is stored as a permutation.
    """

    vertices: tuple[tuple[str, str], ...]
    edges: frozenset[tuple[str, str, str]]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.vertices)

    def label(self, name: str) -> str:
        for n, lab in self.vertices:
            if n == name:
                return lab
        raise KeyError(name)

    @property
    def labels(self) -> dict[str, str]:
        return dict(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def sorted_edges(self) -> list[tuple[str, str, str]]:
        order = {n: i for i, n in enumerate(self.names)}
        return sorted(self.edges, key=lambda e: (order[e[0]], order[e[1]], e[2]))

    def incident(self, name: str, among=None) -> list[tuple[str, str, str]]:
        """Edges between ``name`` and a vertex of ``among`` (all vertices if None)."""
        out = []
        for e in self.sorted_edges():
            if e[0] == name and (among is None or e[1] in among) and e[1] != name:
                out.append(e)
            elif e[1] == name and (among is None or e[0] in among) and e[0] != name:
                out.append(e)
        return out

    def is_connected(self, subset=None) -> bool:
        nodes = set(self.names if subset is None else subset)
        if not nodes:
            return False
        adj = {n: set() for n in nodes}
        for s, d, _ in self.edges:
            if s in nodes and d in nodes:
                adj[s].add(d)
                adj[d].add(s)
        start = next(iter(sorted(nodes)))
        seen = {start}
        stack = [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return seen == nodes

    def to_text(self) -> str:
        labels = self.labels
        parts = []
        for s, d, el in self.sorted_edges():
            parts.append(f"({s}:{labels[s]})-[:{el}]->({d}:{labels[d]})")
        return ",".join(parts)

    def __str__(self) -> str:
        return self.to_text()


def make_query(edges, labels=None, *, edge_label: str = DEFAULT_LABEL, validate: bool = True) -> QueryGraph:
    """Build a QueryGraph from ``(src, dst[, label])`` tuples.

    ``labels`` optionally maps vertex names to labels; vertex order is order of
    first appearance in ``edges``.
    """
    labels = labels or {}
    names: list[str] = []
    es = []
    for e in edges:
        s, d = str(e[0]), str(e[1])
        el = str(e[2]) if len(e) > 2 else edge_label
        for n in (s, d):
            if n not in names:
                names.append(n)
        es.append((s, d, el))
    q = QueryGraph(tuple((n, labels.get(n, DEFAULT_LABEL)) for n in names), frozenset(es))
    if validate:
        if len(set(es)) != len(es):
            raise QueryValidationError("duplicate query edge")
        _validate(q)
    return q


def _validate(q: QueryGraph) -> None:
    for s, d, _ in q.edges:
        if s == d:
            raise QueryValidationError(f"self-loop on query vertex {s!r} is not supported")
    if not q.is_connected():
        raise QueryValidationError("query pattern is disconnected")


_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_NODE = re.compile(rf"\(\s*({_NAME})\s*(?::\s*({_NAME})\s*)?\)")
_REL = re.compile(rf"-\[\s*(?::\s*({_NAME})\s*)?\]->")


def parse_query(text: str) -> QueryGraph:
    """Parse comma-separated ``(a[:L])-[:E]->(b[:L])`` edge patterns."""
    pos = 0
    labels: dict[str, str] = {}
    names: list[str] = []
    edges: list[tuple[str, str, str]] = []

    def skip_ws(p):
        while p < len(text) and text[p].isspace():
            p += 1
        return p

    def node(p):
        m = _NODE.match(text, p)
        if not m:
            raise QuerySyntaxError("expected '(name[:LABEL])'", p + 1)
        name, label = m.group(1), m.group(2) or None
        if name in labels and label is not None and labels[name] != label:
            if labels[name] != DEFAULT_LABEL or name in explicit:
                raise QuerySyntaxError(f"conflicting labels for {name!r}", p + 1)
        if label is not None:
            labels[name] = label
            explicit.add(name)
        else:
            labels.setdefault(name, DEFAULT_LABEL)
        if name not in names:
            names.append(name)
        return name, m.end()

    explicit: set[str] = set()
    pos = skip_ws(pos)
    if pos >= len(text):
        raise QuerySyntaxError("empty pattern", 1)
    while True:
        pos = skip_ws(pos)
        src, pos = node(pos)
        pos = skip_ws(pos)
        m = _REL.match(text, pos)
        if not m:
            raise QuerySyntaxError("expected '-[:LABEL]->'", pos + 1)
        el = m.group(1) or DEFAULT_LABEL
        pos = skip_ws(m.end())
        dst, pos = node(pos)
        edges.append((src, dst, el))
        pos = skip_ws(pos)
        if pos >= len(text):
            break
        if text[pos] != ",":
            raise QuerySyntaxError("expected ','", pos + 1)
        pos += 1

    if len(set(edges)) != len(edges):
        raise QueryValidationError("duplicate query edge")
    q = QueryGraph(tuple((n, labels[n]) for n in names), frozenset(edges))
    _validate(q)
    return q


def project(q: QueryGraph, subset) -> QueryGraph:
    """Induced sub-pattern on ``subset``; the result may be disconnected."""
    subset = set(subset)
    if not subset:
        raise ValueError("projection onto an empty vertex set")
    unknown = subset - set(q.names)
    if unknown:
        raise ValueError(f"unknown query vertices {sorted(unknown)}")
    verts = tuple((n, lab) for n, lab in q.vertices if n in subset)
    edges = frozenset(e for e in q.edges if e[0] in subset and e[1] in subset)
    return QueryGraph(verts, edges)


def _encoding(q: QueryGraph, order) -> tuple:
    pos = {n: i for i, n in enumerate(order)}
    labels = q.labels
    return (tuple(labels[n] for n in order),
            tuple(sorted((pos[s], pos[d], el) for s, d, el in q.edges)))


def _invariant(q: QueryGraph, name: str) -> tuple:
    labels = q.labels
    out = sorted((el, labels[d]) for s, d, el in q.edges if s == name)
    inn = sorted((el, labels[s]) for s, d, el in q.edges if d == name)
    return (labels[name], len(out), len(inn), tuple(out), tuple(inn))


@lru_cache(maxsize=200_000)
def canonical_form(q: QueryGraph, distinguished: str | None = None) -> tuple[str, tuple[str, ...]]:
    """Return ``(key, order)``: the canonical key and the vertex order realising it.

    The distinguished vertex, when given, is pinned to the last position. The
    search permutes only within classes of equal local invariants.
    """
    names = [n for n in q.names if n != distinguished]
    classes: dict[tuple, list[str]] = {}
    for n in names:
        classes.setdefault(_invariant(q, n), []).append(n)
    groups = [classes[k] for k in sorted(classes)]
    tail = (distinguished,) if distinguished is not None else ()
    best = None
    best_order = None
    for choice in itertools.product(*(itertools.permutations(g) for g in groups)):
        order = tuple(itertools.chain.from_iterable(choice)) + tail
        enc = _encoding(q, order)
        if best is None or enc < best:
            best, best_order = enc, order
    if best is None:
        best, best_order = _encoding(q, tail), tail
    marker = "*" if distinguished is not None else ""
    return marker + repr(best), best_order


def canonicalize(q: QueryGraph, distinguished: str | None = None) -> str:
    if distinguished is not None and distinguished not in q.names:
        raise ValueError(f"{distinguished!r} is not a vertex of the query")
    return canonical_form(q, distinguished)[0]


def relabel(q: QueryGraph, mapping: dict[str, str]) -> QueryGraph:
    """Rename query vertices (labels are kept)."""
    return QueryGraph(tuple((mapping[n], lab) for n, lab in q.vertices),
                      frozenset((mapping[s], mapping[d], el) for s, d, el in q.edges))
