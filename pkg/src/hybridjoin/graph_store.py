"""In-memory graph store with sorted, label-partitioned adjacency lists.

Adjacency is kept as one CSR block per (edge label, neighbour label) pair and
direction, so locating the partition of a vertex is two array reads and the
returned neighbour list is a view into the shared targets array.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_LABEL = "_"
FORWARD = "forward"
BACKWARD = "backward"
DIRECTIONS = (FORWARD, BACKWARD)

_EMPTY = np.empty(0, dtype=np.int64)
_EMPTY.setflags(write=False)


class GraphFormatError(ValueError):
    """A malformed row in a vertices or edges file."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ReferentialError(ValueError):
    """An edge refers to a vertex that was never declared."""


@dataclass(frozen=True)
class CSR:
    offsets: np.ndarray
    targets: np.ndarray

    def row(self, v: int) -> np.ndarray:
        return self.targets[self.offsets[v]:self.offsets[v + 1]]


@dataclass
class Graph:
    """Immutable directed graph with labelled vertices and edges.

    Labels are interned to dense integer ids at construction. ``forward`` and
    ``backward`` map ``(edge_label_id, neighbour_label_id)`` to a CSR block.
    Vertex ids that were never declared carry label id ``-1``.
    """

    vertex_labels: np.ndarray
    vertex_label_names: list[str]
    edge_label_names: list[str]
    forward: dict[tuple[int, int], CSR]
    backward: dict[tuple[int, int], CSR]
    edge_label_counts: dict[tuple[int, int, int], int]
    duplicate_edges: int = 0
    _vertex_label_ids: dict[str, int] = field(default_factory=dict, repr=False)
    _edge_label_ids: dict[str, int] = field(default_factory=dict, repr=False)
    _populations: dict = field(default_factory=dict, repr=False)

    @property
    def vertex_count(self) -> int:
        return len(self.vertex_labels)

    @property
    def edge_count(self) -> int:
        return sum(self.edge_label_counts.values())

    @classmethod
    def from_edges(cls, vertex_labels, edges, *, edge_label: str = DEFAULT_LABEL) -> "Graph":
        """Build a graph from in-memory data.

        ``vertex_labels`` is a sequence of label strings indexed by vertex id
        (or a mapping id -> label). ``edges`` holds ``(src, dst)`` or
        ``(src, dst, label)`` tuples.
        """
        if isinstance(vertex_labels, dict):
            labels = dict(vertex_labels)
        else:
            labels = dict(enumerate(vertex_labels))
        triples = []
        for e in edges:
            if len(e) == 2:
                triples.append((int(e[0]), int(e[1]), edge_label))
            else:
                triples.append((int(e[0]), int(e[1]), str(e[2])))
        return _build(labels, triples)

    def vertex_label_id(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        return self._vertex_label_ids.get(label, -1)

    def edge_label_id(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        return self._edge_label_ids.get(label, -1)

    def label_of(self, v: int) -> str:
        lid = int(self.vertex_labels[v])
        return self.vertex_label_names[lid] if lid >= 0 else ""

    def vertices_with_label(self, label) -> np.ndarray:
        lid = self.vertex_label_id(label)
        if lid < 0:
            return _EMPTY
        return np.flatnonzero(self.vertex_labels == lid)

    def partition(self, direction: str, edge_label, dest_label) -> CSR | None:
        """CSR block for one direction and label pair, or None when absent."""
        el = self.edge_label_id(edge_label)
        nl = self.vertex_label_id(dest_label)
        index = self.forward if direction == FORWARD else self.backward
        return index.get((el, nl))

    def neighbors(self, v: int, direction: str, edge_label, dest_label) -> np.ndarray:
        if direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {direction!r}")
        if not 0 <= v < self.vertex_count:
            raise IndexError(f"vertex {v} out of range")
        block = self.partition(direction, edge_label, dest_label)
        if block is None:
            return _EMPTY
        return block.row(v)

    def has_edge(self, u: int, v: int, edge_label) -> bool:
        lid = int(self.vertex_labels[v])
        row = self.neighbors(u, FORWARD, edge_label, lid)
        i = np.searchsorted(row, v)
        return bool(i < len(row) and row[i] == v)

    def edges(self):
        """Yield every edge as ``(src, dst, edge_label_name)``."""
        for (el, _), block in sorted(self.forward.items()):
            name = self.edge_label_names[el]
            for u in range(self.vertex_count):
                for v in block.row(u):
                    yield u, int(v), name

    def edge_population(self, edge_label, src_label, dst_label) -> np.ndarray:
        """All edges of one label triple as an ``(n, 2)`` array, sorted."""
        key = (self.edge_label_id(edge_label), self.vertex_label_id(src_label),
               self.vertex_label_id(dst_label))
        cached = self._populations.get(key)
        if cached is not None:
            return cached
        el, sl, dl = key
        block = self.forward.get((el, dl)) if min(key) >= 0 else None
        if block is None:
            pop = np.empty((0, 2), dtype=np.int64)
        else:
            degrees = np.diff(block.offsets)
            srcs = np.repeat(np.arange(self.vertex_count), degrees)
            mask = self.vertex_labels[srcs] == sl
            pop = np.column_stack([srcs[mask], block.targets[mask]]).astype(np.int64)
        self._populations[key] = pop
        return pop


def _build(labels: dict[int, str], triples) -> Graph:
    n = max(labels) + 1 if labels else 0
    vnames = sorted(set(labels.values()))
    vids = {name: i for i, name in enumerate(vnames)}
    vertex_labels = np.full(n, -1, dtype=np.int64)
    for v, name in labels.items():
        if v < 0:
            raise ValueError(f"negative vertex id {v}")
        vertex_labels[v] = vids[name]

    enames = sorted({t[2] for t in triples})
    eids = {name: i for i, name in enumerate(enames)}
    unique = set()
    duplicates = 0
    for u, v, name in triples:
        if u not in labels or v not in labels:
            missing = u if u not in labels else v
            raise ReferentialError(f"edge {u}->{v} refers to undeclared vertex {missing}")
        key = (u, v, eids[name])
        if key in unique:
            duplicates += 1
        unique.add(key)
    if duplicates:
        log.warning("dropped %d duplicate edges", duplicates)

    if unique:
        arr = np.array(sorted(unique), dtype=np.int64)
    else:
        arr = np.empty((0, 3), dtype=np.int64)
    forward = _index(arr[:, 0], arr[:, 1], arr[:, 2], vertex_labels, n)
    backward = _index(arr[:, 1], arr[:, 0], arr[:, 2], vertex_labels, n)

    counts: dict[tuple[int, int, int], int] = {}
    for (el, dl), block in forward.items():
        degrees = np.diff(block.offsets)
        per_label = np.bincount(vertex_labels[degrees > 0], weights=degrees[degrees > 0],
                                minlength=len(vnames))
        for sl, c in enumerate(per_label):
            if c:
                counts[(el, sl, dl)] = int(c)

    return Graph(vertex_labels=vertex_labels, vertex_label_names=vnames,
                 edge_label_names=enames, forward=forward, backward=backward,
                 edge_label_counts=counts, duplicate_edges=duplicates,
                 _vertex_label_ids=vids, _edge_label_ids=eids)


def _index(src, dst, elabel, vertex_labels, n) -> dict[tuple[int, int], CSR]:
    out = {}
    if len(src) == 0:
        return out
    nlabel = vertex_labels[dst]
    for el in np.unique(elabel):
        for nl in np.unique(nlabel[elabel == el]):
            mask = (elabel == el) & (nlabel == nl)
            s, d = src[mask], dst[mask]
            order = np.lexsort((d, s))
            s, d = s[order], d[order]
            offsets = np.zeros(n + 1, dtype=np.int64)
            np.add.at(offsets, s + 1, 1)
            np.cumsum(offsets, out=offsets)
            targets = np.ascontiguousarray(d)
            offsets.setflags(write=False)
            targets.setflags(write=False)
            out[(int(el), int(nl))] = CSR(offsets, targets)
    return out


def _rows(path, header: bool):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            yield lineno, [c.strip() for c in row]


def _parse_id(path, lineno, text) -> int:
    try:
        v = int(text)
    except ValueError:
        raise GraphFormatError(path, lineno, f"vertex id {text!r} is not an integer") from None
    if v < 0:
        raise GraphFormatError(path, lineno, f"vertex id {v} is negative")
    return v


def load_graph(vertices_path, edges_path, *, header: bool = False) -> Graph:
    """Load ``id,label`` vertex rows and ``src,dst,label`` edge rows.

    The label columns are optional; missing labels become ``DEFAULT_LABEL``.
    Duplicate edges are dropped and counted in ``Graph.duplicate_edges``.
    """
    vertices_path, edges_path = Path(vertices_path), Path(edges_path)
    labels: dict[int, str] = {}
    for lineno, row in _rows(vertices_path, header):
        if len(row) > 2:
            raise GraphFormatError(vertices_path, lineno, f"expected 'id,label', got {len(row)} columns")
        v = _parse_id(vertices_path, lineno, row[0])
        labels[v] = row[1] if len(row) == 2 and row[1] else DEFAULT_LABEL

    triples = []
    for lineno, row in _rows(edges_path, header):
        if len(row) not in (2, 3):
            raise GraphFormatError(edges_path, lineno, f"expected 'src,dst,label', got {len(row)} columns")
        u = _parse_id(edges_path, lineno, row[0])
        v = _parse_id(edges_path, lineno, row[1])
        label = row[2] if len(row) == 3 and row[2] else DEFAULT_LABEL
        if u not in labels or v not in labels:
            missing = u if u not in labels else v
            raise ReferentialError(f"{edges_path}:{lineno}: vertex {missing} not declared")
        triples.append((u, v, label))
    return _build(labels, triples)


def save_graph(g: Graph, vertices_path, edges_path) -> None:
    """Write ``g`` in the format read by :func:`load_graph`, without header rows."""
    with open(vertices_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for v in range(g.vertex_count):
            w.writerow([v, g.label_of(v)])
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(g.edges())


def neighbors(g: Graph, v: int, direction: str, edge_label, dest_label) -> np.ndarray:
    return g.neighbors(v, direction, edge_label, dest_label)


def sample_edges(g: Graph, z: int, edge_label, src_label, dst_label, seed: int = 0) -> np.ndarray:
    """Draw ``z`` edges uniformly with replacement from one label triple.

    When the population holds at most ``z`` edges it is returned whole, once
    each, which makes estimates on small graphs exact.
    """
    if z < 1:
        raise ValueError("z must be >= 1")
    pop = g.edge_population(edge_label, src_label, dst_label)
    if len(pop) <= z:
        return pop.copy()
    rng = np.random.default_rng(seed)
    return pop[rng.integers(0, len(pop), size=z)]
