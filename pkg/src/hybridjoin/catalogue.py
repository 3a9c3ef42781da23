"""Subgraph catalogue: sampled list sizes and selectivities of one-vertex extensions.

An entry is keyed by the canonical form of the extended pattern ``Q_k`` with
the new vertex distinguished; that single key encodes ``(Q_{k-1}, A, l_k)``.
Descriptors inside an entry are stored in canonical coordinates
``(position, direction, edge_label)``.
"""

from __future__ import annotations

import hashlib
import itertools
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph_store import BACKWARD, FORWARD, Graph, sample_edges
from .query import QueryGraph, canonical_form, project

FORMAT_VERSION = "v1"
NEW_VERTEX = "__ext__"
FALLBACK_MU = 1.0


class CatalogueFormatError(ValueError):
    pass


@dataclass
class CatalogueEntry:
    key: str
    descriptors: tuple
    dest_label: str
    mu: float
    avg_list_sizes: dict
    sample_support: int
    extensions: int = 0

    @property
    def exact_mu(self) -> Fraction | None:
        return Fraction(self.extensions, self.sample_support) if self.sample_support else None


@dataclass
class PatternStat:
    """Sampled support of a stored sub-pattern.

    ``fraction`` is only meaningful for two-vertex patterns: the share of
    sampled scan edges that also carry the pattern's other edges.
    """

    key: str
    support: int
    fraction: float = 1.0
    sampled: int = 0


@dataclass
class ExtensionEstimate:
    mu: float
    avg_list_sizes: dict
    support: int
    key: str
    low_confidence: bool = False
    # the same selectivity as a ratio of sample counts, when there is one
    exact: Fraction | None = None


@dataclass
class Catalogue:
    h: int
    z: int
    seed: int = 0
    entries: dict[str, CatalogueEntry] = field(default_factory=dict)
    patterns: dict[str, PatternStat] = field(default_factory=dict)
    base_counts: dict[tuple[str, str, str], int] = field(default_factory=dict)
    vertex_label_counts: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Catalogue):
            return NotImplemented
        return (self.h, self.z, self.seed, self.entries, self.patterns, self.base_counts,
                self.vertex_label_counts) == (other.h, other.z, other.seed, other.entries,
                                              other.patterns, other.base_counts,
                                              other.vertex_label_counts)

    def average_degree(self, direction: str, edge_label: str, src_label: str, dst_label: str) -> float:
        """Mean size of one adjacency partition over vertices of ``src_label``."""
        if direction == FORWARD:
            count = self.base_counts.get((edge_label, src_label, dst_label), 0)
        else:
            count = self.base_counts.get((edge_label, dst_label, src_label), 0)
        n = self.vertex_label_counts.get(src_label, 0)
        return count / n if n else 0.0


def extension_query(qk_minus_1: QueryGraph, descriptors, dest_label: str) -> QueryGraph:
    """``Q_{k-1}`` plus a new vertex joined by the edges the descriptors describe."""
    edges = set(qk_minus_1.edges)
    for name, direction, el in descriptors:
        if direction == FORWARD:
            edges.add((name, NEW_VERTEX, el))
        else:
            edges.add((NEW_VERTEX, name, el))
    return QueryGraph(qk_minus_1.vertices + ((NEW_VERTEX, dest_label),), frozenset(edges))


def extension_key(qk_minus_1: QueryGraph, descriptors, dest_label: str):
    qk = extension_query(qk_minus_1, descriptors, dest_label)
    key, order = canonical_form(qk, NEW_VERTEX)
    pos = {n: i for i, n in enumerate(order)}
    canon = {d: (pos[d[0]], d[1], d[2]) for d in descriptors}
    return key, canon


def lookup(c: Catalogue, qk_minus_1: QueryGraph, descriptors, dest_label: str) -> CatalogueEntry | None:
    """Stored entry re-keyed by the caller's descriptors, or None when missing."""
    descriptors = tuple(descriptors)
    if len(qk_minus_1) > c.h or not descriptors:
        return None
    key, canon = extension_key(qk_minus_1, descriptors, dest_label)
    e = c.entries.get(key)
    if e is None:
        return None
    sizes = {d: e.avg_list_sizes[canon[d]] for d in descriptors}
    return CatalogueEntry(key, descriptors, dest_label, e.mu, sizes, e.sample_support, e.extensions)


def _default_sizes(c: Catalogue, qk_minus_1: QueryGraph, descriptors, dest_label):
    labels = qk_minus_1.labels
    return {d: c.average_degree(d[1], d[2], labels[d[0]], dest_label) for d in descriptors}


def _reductions(qk_minus_1: QueryGraph, descriptors, keep: int, memo=None):
    names = qk_minus_1.names
    out = []
    for kept in itertools.combinations(names, keep):
        kept_set = frozenset(kept)
        reduced = tuple(d for d in descriptors if d[0] in kept_set)
        if not reduced:
            continue
        if memo is None:
            connected = qk_minus_1.is_connected(kept_set)
        else:
            connected = memo.get(kept_set)
            if connected is None:
                connected = memo[kept_set] = qk_minus_1.is_connected(kept_set)
        if not connected:
            continue
        out.append((kept, reduced))
    # more retained descriptors first: those constrain the extension most
    out.sort(key=lambda r: (-len(r[1]), r[0]))
    return out


def estimate_extension(c: Catalogue, qk_minus_1: QueryGraph, descriptors, dest_label: str,
                       *, max_reductions: int | None = None, memo: dict | None = None) -> ExtensionEstimate:
    """Selectivity and average list sizes for extending ``Q_{k-1}`` by one vertex.

    Keys with at most ``h`` vertices are authoritative: a missing one means no
    sampled match extended that way, so the selectivity is zero. Larger keys
    are reduced by dropping vertices until ``h`` remain, and the minimum
    selectivity over all reductions is used. ``memo`` caches reduced
    estimates; it is only valid while every ``qk_minus_1`` passed with it is
    a projection of the same query.
    """
    descriptors = tuple(descriptors)
    labels = qk_minus_1.labels
    if any(_edge_count(c, labels[d[0]], d, dest_label) == 0 for d in descriptors):
        return ExtensionEstimate(0.0, _default_sizes(c, qk_minus_1, descriptors, dest_label), 0,
                                 extension_key(qk_minus_1, descriptors, dest_label)[0]
                                 if len(qk_minus_1) <= c.h else "", exact=Fraction(0))
    if len(qk_minus_1) <= c.h:
        e = lookup(c, qk_minus_1, descriptors, dest_label)
        if e is not None:
            return ExtensionEstimate(e.mu, e.avg_list_sizes, e.sample_support, e.key, exact=e.exact_mu)
        key = extension_key(qk_minus_1, descriptors, dest_label)[0]
        return ExtensionEstimate(0.0, _default_sizes(c, qk_minus_1, descriptors, dest_label), 0, key,
                                 exact=Fraction(0))

    keep = c.h
    while keep >= 2:
        candidates = _reductions(qk_minus_1, descriptors, keep, memo)
        if max_reductions is not None:
            candidates = candidates[:max_reductions]
        found = []
        for kept, reduced in candidates:
            mk = (kept, reduced, dest_label)
            est = memo.get(mk) if memo is not None else None
            if est is None:
                est = estimate_extension(c, project(qk_minus_1, kept), reduced, dest_label)
                if memo is not None:
                    memo[mk] = est
            found.append((est.mu, est.key, reduced, est))
        if found:
            found.sort(key=lambda f: (f[0], f[1]))
            best = found[0][3]
            sizes = {}
            for _, _, _, est in found:
                for d, s in est.avg_list_sizes.items():
                    sizes.setdefault(d, s)
            defaults = _default_sizes(c, qk_minus_1, descriptors, dest_label)
            for d in descriptors:
                sizes.setdefault(d, defaults[d])
            sizes = {d: sizes[d] for d in descriptors}
            return ExtensionEstimate(best.mu, sizes, best.support, best.key, exact=best.exact)
        keep -= 1
    return ExtensionEstimate(FALLBACK_MU, _default_sizes(c, qk_minus_1, descriptors, dest_label),
                             0, "", low_confidence=True)


def _edge_count(c: Catalogue, src_vertex_label, descriptor, dest_label) -> int:
    _, direction, el = descriptor
    if direction == FORWARD:
        return c.base_counts.get((el, src_vertex_label, dest_label), 0)
    return c.base_counts.get((el, dest_label, src_vertex_label), 0)


def estimate_mu(c: Catalogue, qk_minus_1: QueryGraph, descriptors, dest_label: str, **kw) -> float:
    return estimate_extension(c, qk_minus_1, descriptors, dest_label, **kw).mu


def descriptors_for(q: QueryGraph, base, target: str) -> tuple:
    """Descriptors ``(source, direction, edge_label)`` extending ``base`` to ``target``."""
    base = set(base)
    out = []
    for s, d, el in q.sorted_edges():
        if d == target and s in base:
            out.append((s, FORWARD, el))
        elif s == target and d in base:
            out.append((d, BACKWARD, el))
    return tuple(sorted(out))


def pair_cardinality(c: Catalogue, q2: QueryGraph) -> tuple[float, int]:
    """Estimated matches of a two-vertex pattern and the support backing it."""
    n, support = _pair_exact(c, q2)
    return float(n), support


def _pair_exact(c: Catalogue, q2: QueryGraph) -> tuple[Fraction, int]:
    labels = q2.labels
    edges = sorted(q2.edges, key=lambda e: (e[2], labels[e[0]], labels[e[1]]))
    if not edges:
        raise ValueError("two-vertex pattern without edges")
    s, d, el = edges[0]
    base = c.base_counts.get((el, labels[s], labels[d]), 0)
    if base == 0:
        return Fraction(0), 0
    stat = c.patterns.get(canonical_form(q2)[0])
    if stat is None:
        return (Fraction(base), base) if len(edges) == 1 else (Fraction(0), 0)
    if stat.sampled:
        return Fraction(base * stat.support, stat.sampled), stat.support
    return Fraction(base * stat.fraction), stat.support


class CardinalityEstimator:
    """Memoised cardinality estimates for projections of one query.

    ``card(S) = card(S - v) * mu(S - v -> v)`` where ``v`` is the removable
    vertex whose extension entry has the highest sample support, ties broken
    by the smallest canonical key.
    """

    def __init__(self, c: Catalogue, q: QueryGraph, *, max_reductions: int | None = None):
        self.c = c
        self.q = q
        self.max_reductions = max_reductions
        self._card: dict[frozenset, float] = {}
        self._exact: dict[frozenset, Fraction | None] = {}
        self._ext: dict[tuple[frozenset, str], ExtensionEstimate] = {}
        self._memo: dict = {}
        self.low_confidence = False

    def extension(self, base, target: str) -> ExtensionEstimate:
        base = frozenset(base)
        k = (base, target)
        est = self._ext.get(k)
        if est is None:
            sub = project(self.q, base)
            descs = descriptors_for(self.q, base, target)
            est = estimate_extension(self.c, sub, descs, self.q.label(target),
                                     max_reductions=self.max_reductions, memo=self._memo)
            self.low_confidence |= est.low_confidence
            self._ext[k] = est
        return est

    def card(self, subset) -> float:
        subset = frozenset(subset)
        v = self._card.get(subset)
        if v is not None:
            return v
        exact = None
        if len(subset) == 1:
            (name,) = subset
            exact = Fraction(self.c.vertex_label_counts.get(self.q.label(name), 0))
            v = float(exact)
        elif len(subset) == 2:
            exact = _pair_exact(self.c, project(self.q, subset))[0]
            v = float(exact)
        else:
            best = None
            for name in sorted(subset):
                rest = subset - {name}
                if not self.q.is_connected(rest):
                    continue
                est = self.extension(rest, name)
                rank = (-est.support, est.key, name)
                if best is None or rank < best[0]:
                    best = (rank, rest, est)
            _, rest, est = best
            v = self.card(rest) * est.mu
            # products of sample ratios stay exact so exhaustive samples give integer counts
            below = self._exact.get(rest)
            if below is not None and est.exact is not None:
                exact = below * est.exact
                v = float(exact)
        self._card[subset] = v
        self._exact[subset] = exact
        return v


def estimate_cardinality(c: Catalogue, q: QueryGraph) -> float:
    return CardinalityEstimator(c, q).card(q.names)


# -- construction ---------------------------------------------------------

def _derived_seed(seed: int, *parts) -> np.random.SeedSequence:
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return np.random.SeedSequence([seed, int.from_bytes(digest[:8], "little")])


def _subsets(items):
    items = sorted(items)
    for r in range(1, len(items) + 1):
        yield from itertools.combinations(items, r)


@dataclass
class _Pattern:
    query: QueryGraph
    matches: np.ndarray  # rows follow the pattern's vertex order "0".."k-1"


def _pattern_query(labels, edges) -> QueryGraph:
    names = [str(i) for i in range(len(labels))]
    return QueryGraph(tuple(zip(names, labels)), frozenset((str(s), str(d), el) for s, d, el in edges))


def _canonical_pattern(q: QueryGraph, rows: np.ndarray) -> tuple[str, _Pattern]:
    key, order = canonical_form(q)
    idx = [int(n) for n in order]
    labels = [q.label(n) for n in order]
    remap = {n: str(i) for i, n in enumerate(order)}
    cq = QueryGraph(tuple((str(i), lab) for i, lab in enumerate(labels)),
                    frozenset((remap[s], remap[d], el) for s, d, el in q.edges))
    rows = rows[:, idx] if len(rows) else rows.reshape(0, len(idx))
    return key, _Pattern(cq, rows)


def build_catalogue(g: Graph, h: int = 3, z: int = 1000, seed: int = 0) -> Catalogue:
    """Sample ``z`` edges per edge-label triple and measure every observed extension.

    Matches of each stored sub-pattern are capped at ``z`` by uniform
    subsampling, so ``z`` at least as large as every edge population and every
    sub-pattern match count makes all averages exact.
    """
    if h < 2:
        raise ValueError("h must be >= 2")
    if z < 1:
        raise ValueError("z must be >= 1")
    cat = Catalogue(h=h, z=z, seed=seed)
    vnames, enames = g.vertex_label_names, g.edge_label_names
    for (el, sl, dl), n in g.edge_label_counts.items():
        cat.base_counts[(enames[el], vnames[sl], vnames[dl])] = n
    counts = np.bincount(g.vertex_labels[g.vertex_labels >= 0], minlength=len(vnames))
    cat.vertex_label_counts = {vnames[i]: int(c) for i, c in enumerate(counts) if c}

    level = _pair_patterns(g, cat, z, seed)
    for k in range(2, h + 1):
        nxt: dict[str, _Pattern] = {}
        for key in sorted(level):
            _extend_pattern(g, cat, key, level[key], nxt if k < h else None, z, seed)
        level = nxt
    return cat


def _pair_patterns(g: Graph, cat: Catalogue, z: int, seed: int) -> dict[str, _Pattern]:
    vnames, enames = g.vertex_label_names, g.edge_label_names
    types = sorted((enames[el], vnames[sl], vnames[dl]) for (el, sl, dl) in g.edge_label_counts)
    found: dict[str, tuple[_Pattern, int]] = {}
    for t in types:
        el, sl, dl = t
        sample = sample_edges(g, z, el, sl, dl, seed=_derived_seed(seed, *t).generate_state(1)[0])
        if len(sample) == 0:
            continue
        groups: dict[frozenset, list] = {}
        for u, v in sample:
            full = set()
            for e2 in enames:
                if g.has_edge(int(u), int(v), e2):
                    full.add((0, 1, e2))
                if g.has_edge(int(v), int(u), e2):
                    full.add((1, 0, e2))
            others = full - {(0, 1, el)}
            for extra in itertools.chain([()], _subsets(others)):
                es = frozenset(((0, 1, el),) + tuple(extra))
                types_in = [(e[2], (sl, dl)[e[0]], (sl, dl)[e[1]]) for e in es]
                if min(types_in) != t:
                    continue
                groups.setdefault(es, []).append((int(u), int(v)))
        for es in sorted(groups, key=lambda s: sorted(s)):
            rows = np.array(groups[es], dtype=np.int64)
            key, pat = _canonical_pattern(_pattern_query([sl, dl], es), rows)
            if key in found:
                continue
            found[key] = (pat, len(sample))
    level = {}
    for key, (pat, n_sample) in found.items():
        cat.patterns[key] = PatternStat(key, len(pat.matches), len(pat.matches) / n_sample, n_sample)
        level[key] = _cap(pat, z, seed, key)
    return level


def _cap(pat: _Pattern, z: int, seed: int, key: str) -> _Pattern:
    if len(pat.matches) <= z:
        return pat
    rng = np.random.default_rng(_derived_seed(seed, key, "cap"))
    rows = np.sort(rng.choice(len(pat.matches), size=z, replace=False))
    return _Pattern(pat.query, pat.matches[rows])


def _extend_pattern(g: Graph, cat: Catalogue, key: str, pat: _Pattern, nxt, z: int, seed: int) -> None:
    q, M = pat.query, pat.matches
    k = len(q)
    n_matches = len(M)
    vnames, enames = g.vertex_label_names, g.edge_label_names
    columns = []  # (position, direction, edge label name, dest label name, CSR)
    for i in range(k):
        for direction, index in ((FORWARD, g.forward), (BACKWARD, g.backward)):
            for (el, nl), block in sorted(index.items()):
                columns.append((i, direction, enames[el], vnames[nl], block))
    sizes = np.zeros((n_matches, len(columns)), dtype=np.float64)
    for c, (i, _, _, _, block) in enumerate(columns):
        vs = M[:, i]
        sizes[:, c] = block.offsets[vs + 1] - block.offsets[vs]
    col_index = {(i, d, el, nl): c for c, (i, d, el, nl, _) in enumerate(columns)}
    col_means = sizes.mean(axis=0) if n_matches else np.zeros(len(columns))

    # per match: candidate vertex -> set of descriptors whose list contains it
    extension_counts: dict[tuple, int] = {}
    records = []
    for r in range(n_matches):
        per_vertex: dict[int, set] = {}
        for c, (i, direction, el, nl, block) in enumerate(columns):
            if sizes[r, c] == 0:
                continue
            for w in block.row(int(M[r, i])):
                per_vertex.setdefault(int(w), set()).add((i, direction, el))
        for w, descs in per_vertex.items():
            lk = vnames[int(g.vertex_labels[w])]
            fs = frozenset(descs)
            records.append((r, w, lk, fs))
            for a in _subsets(fs):
                extension_counts[(a, lk)] = extension_counts.get((a, lk), 0) + 1

    owners: dict[str, tuple] = {}
    for a, lk in sorted(extension_counts):
        named = tuple((str(i), d, el) for i, d, el in a)
        ekey, canon = extension_key(q, named, lk)
        if ekey in cat.entries or ekey in owners:
            continue
        owners[ekey] = (a, lk)
        avg = {}
        for (i, d, el), cd in zip(a, (canon[x] for x in named)):
            col = col_index.get((i, d, el, lk))
            avg[cd] = float(col_means[col]) if col is not None else 0.0
        mu = extension_counts[(a, lk)] / n_matches if n_matches else 0.0
        canon_descs = tuple(sorted(canon[x] for x in named))
        cat.entries[ekey] = CatalogueEntry(ekey, canon_descs, lk, mu, avg, n_matches, extension_counts[(a, lk)])

    if nxt is None:
        return
    wanted: dict[tuple, str] = {}
    for ekey, (a, lk) in owners.items():
        named = tuple((str(i), d, el) for i, d, el in a)
        qk = extension_query(q, named, lk)
        pkey = canonical_form(qk)[0]
        if pkey in nxt or pkey in cat.patterns or pkey in wanted.values():
            continue
        wanted[(a, lk)] = pkey
    if not wanted:
        return
    rows: dict[tuple, list] = {w: [] for w in wanted}
    for r, w, lk, fs in records:
        for (a, alk) in wanted:
            if alk == lk and fs.issuperset(a):
                rows[(a, alk)].append(tuple(M[r]) + (w,))
    for (a, lk), pkey in wanted.items():
        named = tuple((str(i), d, el) for i, d, el in a)
        qk = extension_query(q, named, lk)
        qk = QueryGraph(tuple((str(k) if n == NEW_VERTEX else n, lab) for n, lab in qk.vertices),
                        frozenset((str(k) if s == NEW_VERTEX else s, str(k) if d == NEW_VERTEX else d, el)
                                  for s, d, el in qk.edges))
        arr = np.array(rows[(a, lk)], dtype=np.int64).reshape(-1, k + 1)
        ckey, cpat = _canonical_pattern(qk, arr)
        cat.patterns[ckey] = PatternStat(ckey, len(cpat.matches))
        nxt[ckey] = _cap(cpat, z, seed, ckey)


# -- persistence ------------------------------------------------------------

def _hex(s: str) -> str:
    return s.encode("utf-8").hex()


def _unhex(s: str) -> str:
    return bytes.fromhex(s).decode("utf-8")


def _fmt_desc(d) -> str:
    return f"{d[0]}:{'f' if d[1] == FORWARD else 'b'}:{_hex(d[2])}"


def _parse_desc(s: str):
    pos, direction, el = s.split(":")
    return (int(pos), FORWARD if direction == "f" else BACKWARD, _unhex(el))


def save_catalogue(c: Catalogue, path) -> None:
    lines = [f"catalogue {FORMAT_VERSION} h={c.h} z={c.z} seed={c.seed}"]
    for (el, sl, dl), n in sorted(c.base_counts.items()):
        lines.append(f"base\t{_hex(el)}\t{_hex(sl)}\t{_hex(dl)}\t{n}")
    for label, n in sorted(c.vertex_label_counts.items()):
        lines.append(f"vlabel\t{_hex(label)}\t{n}")
    for key in sorted(c.patterns):
        p = c.patterns[key]
        lines.append(f"pattern\t{_hex(key)}\t{p.support}\t{p.fraction!r}\t{p.sampled}")
    for key in sorted(c.entries):
        e = c.entries[key]
        descs = ",".join(_fmt_desc(d) for d in e.descriptors)
        sizes = ",".join(repr(e.avg_list_sizes[d]) for d in e.descriptors)
        lines.append(f"entry\t{_hex(key)}\t{descs}\t{_hex(e.dest_label)}\t{e.mu!r}\t{sizes}\t{e.sample_support}\t{e.extensions}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_catalogue(path) -> Catalogue:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise CatalogueFormatError("empty catalogue file")
    head = text[0].split()
    if len(head) != 5 or head[0] != "catalogue":
        raise CatalogueFormatError("missing catalogue header")
    if head[1] != FORMAT_VERSION:
        raise CatalogueFormatError(f"unsupported catalogue version {head[1]!r}")
    try:
        params = dict(tok.split("=", 1) for tok in head[2:])
        c = Catalogue(h=int(params["h"]), z=int(params["z"]), seed=int(params["seed"]))
        for lineno, line in enumerate(text[1:], start=2):
            if not line.strip():
                continue
            f = line.split("\t")
            kind = f[0]
            if kind == "base":
                c.base_counts[(_unhex(f[1]), _unhex(f[2]), _unhex(f[3]))] = int(f[4])
            elif kind == "vlabel":
                c.vertex_label_counts[_unhex(f[1])] = int(f[2])
            elif kind == "pattern":
                key = _unhex(f[1])
                c.patterns[key] = PatternStat(key, int(f[2]), float(f[3]), int(f[4]))
            elif kind == "entry":
                key = _unhex(f[1])
                descs = tuple(_parse_desc(s) for s in f[2].split(","))
                sizes = [float(s) for s in f[5].split(",")]
                c.entries[key] = CatalogueEntry(key, descs, _unhex(f[3]), float(f[4]),
                                                dict(zip(descs, sizes)), int(f[6]), int(f[7]))
            else:
                raise CatalogueFormatError(f"line {lineno}: unknown record {kind!r}")
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, CatalogueFormatError):
            raise
        raise CatalogueFormatError(f"malformed catalogue: {exc}") from exc
    return c

