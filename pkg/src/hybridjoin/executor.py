"""Volcano-style plan evaluation with profiled i-cost, adaptive regions and a parallel mode."""

from __future__ import annotations

import itertools
import queue
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .catalogue import Catalogue, CardinalityEstimator
from .graph_store import CSR, FORWARD, Graph
from .plans import Adaptive, Extend, HashJoin, Node, Plan, Scan, make_extend
from .query import QueryGraph

HOMOMORPHISM = "homomorphism"
ISOMORPHISM = "isomorphism"
SEMANTICS = (HOMOMORPHISM, ISOMORPHISM)
ICOST_FULL = "full"
ICOST_UNMATCHED = "unmatched"
ICOST_MODES = (ICOST_FULL, ICOST_UNMATCHED)
GALLOP_RATIO = 32
SCAN_CHUNK = 64

_EMPTY = np.empty(0, dtype=np.int64)


@dataclass
class ExecStats:
    icost_actual: int = 0
    intermediate: dict[str, int] = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0
    output_count: int = 0
    routes: dict[tuple[str, ...], int] = field(default_factory=dict)

    def merge(self, other: "ExecStats") -> None:
        self.icost_actual += other.icost_actual
        self.cache_hits += other.cache_hits
        self.cache_misses += other.cache_misses
        self.output_count += other.output_count
        for k, v in other.intermediate.items():
            self.intermediate[k] = self.intermediate.get(k, 0) + v
        for k, v in other.routes.items():
            self.routes[k] = self.routes.get(k, 0) + v

    def as_text(self) -> str:
        lines = [f"output_count={self.output_count}", f"icost_actual={self.icost_actual}",
                 f"cache_hits={self.cache_hits}", f"cache_misses={self.cache_misses}"]
        lines += [f"intermediate[{k}]={v}" for k, v in self.intermediate.items()]
        lines += [f"route[{','.join(k)}]={v}" for k, v in sorted(self.routes.items())]
        return "\n".join(lines)


@dataclass
class ExecResult:
    count: int
    stats: ExecStats
    matches: list[tuple[int, ...]] | None = None
    vertices: tuple[str, ...] = ()


# -- intersections --------------------------------------------------------

def _intersect2(small: np.ndarray, large: np.ndarray, gallop_ratio) -> np.ndarray:
    if gallop_ratio is not None and len(large) > gallop_ratio * len(small):
        pos = np.searchsorted(large, small)
        pos[pos == len(large)] = 0
        return small[large[pos] == small] if len(large) else _EMPTY
    return np.intersect1d(small, large, assume_unique=True)


def intersect(lists, gallop_ratio: float | None = GALLOP_RATIO) -> np.ndarray:
    """Sorted intersection, smallest list first; one list comes back unchanged.

    Pairs whose size ratio exceeds ``gallop_ratio`` binary-search the smaller
    list in the larger one; ``None`` always merges both lists in full.
    """
    if not lists:
        raise ValueError("intersect needs at least one list")
    if len(lists) == 1:
        return lists[0]
    arrays = sorted((np.asarray(x, dtype=np.int64) for x in lists), key=len)
    acc = arrays[0]
    for other in arrays[1:]:
        if len(acc) == 0:
            break
        acc = _intersect2(acc, other, gallop_ratio)
    return acc


class IntersectionCache:
    """Holds the last computed extension set and its key."""

    __slots__ = ("key", "value")

    def __init__(self):
        self.key = None
        self.value = None


def cached_intersect(cache: IntersectionCache, key, lists):
    """Return ``(extension set, hit)``; a hit means ``key`` equals the previous key."""
    if cache.key is not None and cache.key == key:
        return cache.value, True
    s = intersect(lists)
    cache.key, cache.value = key, s
    return s, False


# -- operators ------------------------------------------------------------

@dataclass
class _Context:
    g: Graph
    query: QueryGraph
    stats: ExecStats
    cache: bool = True
    injective: bool = False
    icost_mode: str = ICOST_FULL
    catalogue: Catalogue | None = None
    estimator: CardinalityEstimator | None = None
    mirror: bool = True
    gallop: bool = True
    tables: dict = field(default_factory=dict)


def _charge(ctx: _Context, lists, t) -> None:
    if ctx.icost_mode == ICOST_FULL:
        ctx.stats.icost_actual += sum(len(x) for x in lists)
        return
    vals = np.fromiter(set(t), dtype=np.int64)
    for x in lists:
        ctx.stats.icost_actual += len(x) - int(np.isin(vals, x, assume_unique=True).sum())


class _ScanOp:
    def __init__(self, node: Scan, ctx: _Context, ranges=None):
        self.node, self.ctx = node, ctx
        self.sig = node.signature()
        g = ctx.g
        s, d, el = node.edges[0]
        self.src_first = s == node.vertices[0]
        self.block = g.partition(FORWARD, el, ctx.query.label(d))
        self.sources = g.vertices_with_label(ctx.query.label(s))
        self.filters = []
        for s2, d2, el2 in node.edges[1:]:
            self.filters.append((s2 == node.vertices[0], g.partition(FORWARD, el2, ctx.query.label(d2))))
        self.ranges = ranges

    def _source_chunks(self):
        if self.ranges is None:
            yield self.sources
        else:
            for lo, hi in self.ranges:
                yield self.sources[lo:hi]

    def __iter__(self):
        ctx = self.ctx
        count = 0
        if self.block is not None:
            for chunk in self._source_chunks():
                for u in chunk.tolist():
                    for v in self.block.row(u).tolist():
                        if ctx.injective and u == v:
                            continue
                        t = (u, v) if self.src_first else (v, u)
                        if self.filters and not self._passes(t):
                            continue
                        count += 1
                        yield t
        ctx.stats.intermediate[self.sig] = ctx.stats.intermediate.get(self.sig, 0) + count

    def _passes(self, t) -> bool:
        for forward_first, block in self.filters:
            if block is None:
                return False
            a, b = t if forward_first else (t[1], t[0])
            row = block.row(a)
            i = np.searchsorted(row, b)
            if i >= len(row) or row[i] != b:
                return False
        return True


class _Step:
    """One extension: descriptors resolved against a tuple layout, plus its cache."""

    def __init__(self, ctx: _Context, layout: tuple[str, ...], target: str, descriptors):
        self.ctx = ctx
        pos = {v: i for i, v in enumerate(layout)}
        dest = ctx.query.label(target)
        self.parts: list[tuple[int, CSR | None]] = []
        for src, direction, el in descriptors:
            self.parts.append((pos[src], ctx.g.partition(direction, el, dest)))
        self.key_idx = tuple(sorted({i for i, _ in self.parts}))
        self.cacheable = len(self.parts) >= 2
        self.cache = IntersectionCache()

    def extension(self, t) -> np.ndarray:
        ctx = self.ctx
        if self.cacheable and ctx.cache:
            key = tuple(t[i] for i in self.key_idx)
            if self.cache.key == key:
                ctx.stats.cache_hits += 1
                return self.cache.value
        lists = [_EMPTY if block is None else block.row(t[i]) for i, block in self.parts]
        _charge(ctx, lists, t)
        s = intersect(lists, GALLOP_RATIO if ctx.gallop else None)
        if self.cacheable:
            ctx.stats.cache_misses += 1
            if ctx.cache:
                self.cache.key, self.cache.value = key, s
        return s

    def emit(self, t, s):
        if self.ctx.injective:
            for v in s.tolist():
                if v not in t:
                    yield t + (v,)
        else:
            for v in s.tolist():
                yield t + (v,)

    def size(self, t, s) -> int:
        if self.ctx.injective:
            return len(s) - sum(1 for v in set(t) if _contains(s, v))
        return len(s)


def _contains(arr: np.ndarray, v: int) -> bool:
    i = np.searchsorted(arr, v)
    return bool(i < len(arr) and arr[i] == v)


class _ExtendOp:
    def __init__(self, node: Extend, child, ctx: _Context):
        self.node, self.child, self.ctx = node, child, ctx
        self.sig = node.signature()
        self.step = _Step(ctx, node.child.vertices, node.target, node.descriptors)

    def __iter__(self):
        count = 0
        step = self.step
        for t in self.child:
            s = step.extension(t)
            for out in step.emit(t, s):
                count += 1
                yield out
        st = self.ctx.stats.intermediate
        st[self.sig] = st.get(self.sig, 0) + count

    def count(self) -> int:
        total = 0
        step = self.step
        for t in self.child:
            total += step.size(t, step.extension(t))
        st = self.ctx.stats.intermediate
        st[self.sig] = st.get(self.sig, 0) + total
        return total


class PartitionedTable:
    """Hash table split into partitions, each guarded by its own lock while building."""

    def __init__(self, partitions: int = 1):
        self.d = max(1, partitions)
        self.parts: list[dict] = [{} for _ in range(self.d)]
        self.locks = [threading.Lock() for _ in range(self.d)]

    def insert_many(self, rows) -> None:
        for key, payload in rows:
            i = hash(key) % self.d
            with self.locks[i]:
                self.parts[i].setdefault(key, []).append(payload)

    def get(self, key):
        return self.parts[hash(key) % self.d].get(key, ())

    def __len__(self) -> int:
        return sum(sum(len(v) for v in p.values()) for p in self.parts)


class _HashJoinOp:
    def __init__(self, node: HashJoin, build, probe, ctx: _Context):
        self.node, self.build, self.probe, self.ctx = node, build, probe, ctx
        self.sig = node.signature()
        keys = node.key_vertices
        bpos = {v: i for i, v in enumerate(node.build.vertices)}
        ppos = {v: i for i, v in enumerate(node.probe.vertices)}
        self.build_key = tuple(bpos[v] for v in keys)
        self.probe_key = tuple(ppos[v] for v in keys)
        probe_set = node.probe.subset
        self.payload = tuple(i for i, v in enumerate(node.build.vertices) if v not in probe_set)
        self.use_mirror = ctx.mirror and node.mirror is not None

    def build_rows(self, tuples):
        bk, pl = self.build_key, self.payload
        for t in tuples:
            yield tuple(t[i] for i in bk), tuple(t[i] for i in pl)

    def _table(self):
        table = self.ctx.tables.get(self.node)
        if table is not None:
            return table, None
        table = PartitionedTable(1)
        if self.use_mirror:
            built = list(self.build)
            table.insert_many(self.build_rows(built))
            return table, built
        table.insert_many(self.build_rows(self.build))
        return table, None

    def _probe_tuples(self, built):
        if built is None:
            yield from self.probe
            return
        # the probe side is isomorphic to the build side: rename instead of recomputing
        bpos = {v: i for i, v in enumerate(self.node.build.vertices)}
        m = dict(self.node.mirror)
        idx = tuple(bpos[m[v]] for v in self.node.probe.vertices)
        for t in built:
            yield tuple(t[i] for i in idx)

    def __iter__(self):
        table, built = self._table()
        pk = self.probe_key
        injective = self.ctx.injective
        count = 0
        for t in self._probe_tuples(built):
            for p in table.get(tuple(t[i] for i in pk)):
                out = t + p
                if injective and len(set(out)) != len(out):
                    continue
                count += 1
                yield out
        st = self.ctx.stats.intermediate
        st[self.sig] = st.get(self.sig, 0) + count


# -- adaptive regions -----------------------------------------------------

def reestimate(mu: float, avg_sizes, actual_sizes) -> tuple[float, float]:
    """Per-tuple i-cost and rescaled ``mu`` once actual list sizes are known.

    ``mu`` is scaled by ``actual / average`` for every known list. A zero
    average leaves ``mu`` unchanged unless the actual list is empty too.
    """
    icost = 0.0
    for avg, actual in zip(avg_sizes, actual_sizes):
        icost += actual
        if avg > 0:
            mu = mu * (actual / avg)
        elif actual == 0:
            mu = 0.0
    return icost, mu


@dataclass
class _RouteStep:
    mu: float
    sizes: list[float]
    known: list[tuple[int, CSR | None] | None]  # base position and block for base-sourced lists
    cacheable: bool


class AdaptiveRegion:
    """Per-ordering routing state and operators of one adaptive node."""

    def __init__(self, node: Adaptive, ctx: _Context):
        if ctx.estimator is None:
            raise ValueError("adaptive execution needs a catalogue")
        self.node, self.ctx = node, ctx
        q = ctx.query
        base = node.base.vertices
        bpos = {v: i for i, v in enumerate(base)}
        self.orderings = node.orderings
        self.route_steps: list[list[_RouteStep]] = []
        self.steps: list[list[_Step]] = []
        self.reorder: list[tuple[int, ...]] = []
        for order in node.orderings:
            rsteps, xsteps = [], []
            current = node.base
            layout = base
            for v in order:
                ext = make_extend(q, current, v)
                est = ctx.estimator.extension(current.subset, v)
                sizes, known = [], []
                for d in ext.descriptors:
                    sizes.append(float(est.avg_list_sizes.get(d, 0.0)))
                    src, direction, el = d
                    if src in bpos:
                        known.append((bpos[src], ctx.g.partition(direction, el, q.label(v))))
                    else:
                        known.append(None)
                cacheable = len(ext.descriptors) >= 2 and all(d[0] in bpos for d in ext.descriptors)
                rsteps.append(_RouteStep(est.mu, sizes, known, cacheable))
                xsteps.append(_Step(ctx, layout, v, ext.descriptors))
                layout = layout + (v,)
                current = ext
            pos = {v: i for i, v in enumerate(layout)}
            self.reorder.append(tuple(pos[v] for v in node.vertices))
            self.route_steps.append(rsteps)
            self.steps.append(xsteps)

    def estimate(self, t, j: int) -> float:
        """Remaining i-cost of ordering ``j`` for base tuple ``t``."""
        card, cost = 1.0, 0.0
        for step in self.route_steps[j]:
            avg, actual = [], []
            total = 0.0
            for size, k in zip(step.sizes, step.known):
                if k is None:
                    total += size
                    continue
                i, block = k
                n = 0 if block is None else len(block.row(t[i]))
                avg.append(size)
                actual.append(n)
            known_cost, mu = reestimate(step.mu, avg, actual)
            total += known_cost
            cost += (min(1.0, card) if step.cacheable else card) * total
            card *= mu
        return cost


def adaptive_route(t, region: AdaptiveRegion) -> int:
    """Index of the cheapest ordering for ``t``; ties keep the earliest, the fixed order first."""
    best, best_cost = 0, None
    for j in range(len(region.orderings)):
        c = region.estimate(t, j)
        if best_cost is None or c < best_cost:
            best, best_cost = j, c
    return best


class _AdaptiveOp:
    def __init__(self, node: Adaptive, base, ctx: _Context):
        self.node, self.base, self.ctx = node, base, ctx
        self.sig = node.signature()
        self.region = AdaptiveRegion(node, ctx)

    def _expand(self, t, steps, depth):
        if depth == len(steps):
            yield t
            return
        step = steps[depth]
        for out in step.emit(t, step.extension(t)):
            yield from self._expand(out, steps, depth + 1)

    def __iter__(self):
        count = 0
        routes = self.ctx.stats.routes
        region = self.region
        for t in self.base:
            j = adaptive_route(t, region) if len(region.orderings) > 1 else 0
            order = region.orderings[j]
            routes[order] = routes.get(order, 0) + 1
            idx = region.reorder[j]
            for out in self._expand(t, region.steps[j], 0):
                count += 1
                yield tuple(out[i] for i in idx)
        st = self.ctx.stats.intermediate
        st[self.sig] = st.get(self.sig, 0) + count


def _connected_orders(q: QueryGraph, base: frozenset, targets) -> list[tuple[str, ...]]:
    out = []
    for perm in itertools.permutations(targets):
        seen = set(base)
        ok = True
        for v in perm:
            if not any((s in seen and d == v) or (d in seen and s == v) for s, d, _ in q.edges):
                ok = False
                break
            seen.add(v)
        if ok:
            out.append(perm)
    return out


def make_adaptive(plan: Plan) -> Plan:
    """Replace every maximal chain of two or more E/I operators by an adaptive region."""
    q = plan.query

    def rewrite(node: Node) -> Node:
        if isinstance(node, Scan):
            return node
        if isinstance(node, HashJoin):
            return HashJoin(rewrite(node.build), rewrite(node.probe), node.mirror)
        if isinstance(node, Adaptive):
            return Adaptive(rewrite(node.base), node.fixed, node.orderings)
        chain = []
        c = node
        while isinstance(c, Extend):
            chain.append(c.target)
            c = c.child
        base = rewrite(c)
        chain.reverse()
        if len(chain) < 2:
            return make_extend(q, base, chain[0])
        fixed = tuple(chain)
        orders = _connected_orders(q, base.subset, fixed)
        orders.remove(fixed)
        return Adaptive(base, fixed, (fixed, *orders))

    return Plan(q, rewrite(plan.root))


# -- entry points ---------------------------------------------------------

def _compile(node: Node, ctx: _Context, ranges=None):
    """Operator tree for ``node``; ``ranges`` restrict the driving scan of this pipeline."""
    if isinstance(node, Scan):
        return _ScanOp(node, ctx, ranges)
    if isinstance(node, Extend):
        return _ExtendOp(node, _compile(node.child, ctx, ranges), ctx)
    if isinstance(node, Adaptive):
        return _AdaptiveOp(node, _compile(node.base, ctx, ranges), ctx)
    prebuilt = node in ctx.tables
    build = None if prebuilt else _compile(node.build, ctx)
    return _HashJoinOp(node, build, _compile(node.probe, ctx, ranges), ctx)


def _context(plan: Plan, g: Graph, stats: ExecStats, *, cache, semantics, icost_mode, catalogue, mirror,
             gallop=True):
    if semantics not in SEMANTICS:
        raise ValueError(f"unknown semantics {semantics!r}")
    if icost_mode not in ICOST_MODES:
        raise ValueError(f"unknown i-cost mode {icost_mode!r}")
    est = CardinalityEstimator(catalogue, plan.query) if catalogue is not None else None
    return _Context(g, plan.query, stats, cache=cache, injective=semantics == ISOMORPHISM,
                    icost_mode=icost_mode, catalogue=catalogue, estimator=est, mirror=mirror, gallop=gallop)


def stream(plan: Plan, g: Graph, stats: ExecStats | None = None, *, cache: bool = True,
           semantics: str = HOMOMORPHISM, icost_mode: str = ICOST_FULL,
           catalogue: Catalogue | None = None, mirror: bool = True, gallop: bool = True):
    """Yield matches as tuples laid out in ``plan.vertices`` order."""
    stats = stats if stats is not None else ExecStats()
    ctx = _context(plan, g, stats, cache=cache, semantics=semantics, icost_mode=icost_mode,
                   catalogue=catalogue, mirror=mirror, gallop=gallop)
    for t in _compile(plan.root, ctx):
        stats.output_count += 1
        yield t


def execute(plan: Plan, g: Graph, mode: str = "count", *, cache: bool = True,
            semantics: str = HOMOMORPHISM, icost_mode: str = ICOST_FULL,
            catalogue: Catalogue | None = None, adaptive: bool = False, mirror: bool = True,
            gallop: bool = True) -> ExecResult:
    """Run ``plan`` on ``g``.

    ``mode`` is ``"count"`` or ``"stream"``; stream mode collects the matches.
    ``adaptive`` rewrites E/I chains into adaptive regions first, which
    needs ``catalogue``. ``gallop=False`` merges every list in full.
    """
    if mode not in ("count", "stream"):
        raise ValueError(f"unknown mode {mode!r}")
    if adaptive:
        plan = make_adaptive(plan)
    stats = ExecStats()
    ctx = _context(plan, g, stats, cache=cache, semantics=semantics, icost_mode=icost_mode,
                   catalogue=catalogue, mirror=mirror, gallop=gallop)
    root = _compile(plan.root, ctx)
    if mode == "count":
        if isinstance(root, _ExtendOp):
            n = root.count()
        else:
            n = sum(1 for _ in root)
        stats.output_count = n
        return ExecResult(n, stats, None, plan.vertices)
    matches = list(root)
    stats.output_count = len(matches)
    return ExecResult(len(matches), stats, matches, plan.vertices)


def _pipelines(node: Node, out: list) -> None:
    """Hash-join build sides in the order they must be materialised."""
    if isinstance(node, Extend):
        _pipelines(node.child, out)
    elif isinstance(node, Adaptive):
        _pipelines(node.base, out)
    elif isinstance(node, HashJoin):
        _pipelines(node.build, out)
        _pipelines(node.probe, out)
        out.append(node)


def _driver(node: Node) -> Scan:
    while not isinstance(node, Scan):
        node = node.child if isinstance(node, Extend) else node.base if isinstance(node, Adaptive) else node.probe
    return node


def execute_parallel(plan: Plan, g: Graph, workers: int, *, cache: bool = True,
                     semantics: str = HOMOMORPHISM, icost_mode: str = ICOST_FULL,
                     catalogue: Catalogue | None = None, adaptive: bool = False,
                     partitions: int | None = None, chunk: int = SCAN_CHUNK, gallop: bool = True) -> ExecResult:
    """Count matches with ``workers`` threads pulling scan ranges from one shared queue.

    Hash tables are built first, split into ``partitions`` (default 64 per
    worker) locked partitions; probing reads them without locks. Each
    worker compiles its own operators, so caches and buffers stay private.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if adaptive:
        plan = make_adaptive(plan)
    d = partitions or 64 * workers
    total = ExecStats()
    tables: dict = {}
    joins: list = []
    _pipelines(plan.root, joins)

    def run_pipeline(top: Node, consume) -> list[ExecStats]:
        scan = _driver(top)
        n_src = len(g.vertices_with_label(plan.query.label(scan.edges[0][0])))
        work: queue.Queue = queue.Queue()
        for lo in range(0, n_src, chunk):
            work.put((lo, min(n_src, lo + chunk)))

        def ranges():
            while True:
                try:
                    yield work.get_nowait()
                except queue.Empty:
                    return

        def worker(_):
            st = ExecStats()
            ctx = _context(plan, g, st, cache=cache, semantics=semantics, icost_mode=icost_mode,
                           catalogue=catalogue, mirror=False, gallop=gallop)
            ctx.tables = tables
            consume(_compile(top, ctx, ranges()), st)
            return st

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, range(workers)))

    for join in joins:
        table = PartitionedTable(d)

        def fill(op, st, join=join, table=table):
            bk = tuple(join.build.vertices.index(v) for v in join.key_vertices)
            probe_set = join.probe.subset
            pl = tuple(i for i, v in enumerate(join.build.vertices) if v not in probe_set)
            table.insert_many((tuple(t[i] for i in bk), tuple(t[i] for i in pl)) for t in op)

        for st in run_pipeline(join.build, fill):
            total.merge(st)
        tables[join] = table

    def count(op, st):
        st.output_count += sum(1 for _ in op)

    for st in run_pipeline(plan.root, count):
        total.merge(st)
    return ExecResult(total.output_count, total, None, plan.vertices)
