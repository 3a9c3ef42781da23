"""Plan trees: Scan, Extend/Intersect and Hash-Join nodes over one query."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

from .graph_store import BACKWARD, FORWARD
from .query import QueryGraph, canonical_form, project


@dataclass(frozen=True)
class Scan:
    """Matches a two-vertex sub-query; the first edge drives, the rest filter."""

    vertices: tuple[str, str]
    edges: tuple[tuple[str, str, str], ...]
    labels: tuple[str, str]

    @cached_property
    def subset(self) -> frozenset:
        return frozenset(self.vertices)

    def __hash__(self) -> int:
        return hash(self.vertices)

    def signature(self) -> str:
        return f"S({','.join(self.vertices)})"


@dataclass(frozen=True)
class Extend:
    """Extends each tuple of ``child`` by ``target`` via intersection.

    ``descriptors`` are ``(source vertex, direction, edge label)`` triples.
    """

    child: "Node"
    target: str
    dest_label: str
    descriptors: tuple[tuple[str, str, str], ...]

    @cached_property
    def vertices(self) -> tuple[str, ...]:
        return self.child.vertices + (self.target,)

    @cached_property
    def subset(self) -> frozenset:
        return self.child.subset | {self.target}

    @cached_property
    def _hash(self) -> int:
        return hash((hash(self.child), self.target))

    def __hash__(self) -> int:
        return self._hash

    def signature(self) -> str:
        return f"E({self.child.signature()};{self.target})"


@dataclass(frozen=True)
class HashJoin:
    build: "Node"
    probe: "Node"
    # (probe vertex, build vertex) pairs when the probe side can reuse the build side
    mirror: tuple[tuple[str, str], ...] | None = field(default=None, compare=False)

    @cached_property
    def vertices(self) -> tuple[str, ...]:
        seen = set(self.probe.vertices)
        return self.probe.vertices + tuple(v for v in self.build.vertices if v not in seen)

    @cached_property
    def subset(self) -> frozenset:
        return self.build.subset | self.probe.subset

    @cached_property
    def _hash(self) -> int:
        return hash(("J", hash(self.build), hash(self.probe)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def key_vertices(self) -> tuple[str, ...]:
        b = self.build.subset
        return tuple(v for v in self.probe.vertices if v in b)

    def signature(self) -> str:
        return f"J({self.build.signature()}|{self.probe.signature()})"


@dataclass(frozen=True)
class Adaptive:
    """A chain of E/I operators whose extension order is picked per input tuple.

    ``orderings`` lists every connected order of the chain's targets, the
    chain's own order first. Output tuples always follow ``fixed``.
    """

    base: "Node"
    fixed: tuple[str, ...]
    orderings: tuple[tuple[str, ...], ...]

    @cached_property
    def vertices(self) -> tuple[str, ...]:
        return self.base.vertices + self.fixed

    @cached_property
    def subset(self) -> frozenset:
        return self.base.subset | frozenset(self.fixed)

    @cached_property
    def _hash(self) -> int:
        return hash(("A", hash(self.base), self.fixed))

    def __hash__(self) -> int:
        return self._hash

    def signature(self) -> str:
        return f"A({self.base.signature()};{','.join(self.fixed)})"


Node = Scan | Extend | HashJoin | Adaptive


def make_scan(q: QueryGraph, pair) -> Scan:
    order = {n: i for i, n in enumerate(q.names)}
    a, b = sorted(pair, key=order.__getitem__)
    edges = tuple(e for e in q.sorted_edges() if {e[0], e[1]} == {a, b})
    if not edges:
        raise ValueError(f"no query edge between {a} and {b}")
    return Scan((a, b), edges, (q.label(a), q.label(b)))


def make_extend(q: QueryGraph, child: Node, target: str) -> Extend:
    base = child.subset
    descs = []
    for s, d, el in q.sorted_edges():
        if d == target and s in base:
            descs.append((s, FORWARD, el))
        elif s == target and d in base:
            descs.append((d, BACKWARD, el))
    if not descs:
        raise ValueError(f"{target} is not adjacent to {sorted(base)}")
    return Extend(child, target, q.label(target), tuple(descs))


def make_hash_join(q: QueryGraph, build: Node, probe: Node) -> HashJoin:
    return HashJoin(build, probe, _mirror(q, build.subset, probe.subset))


@lru_cache(maxsize=100_000)
def _mirror(q: QueryGraph, build: frozenset, probe: frozenset):
    """Vertex correspondence when both sides are isomorphic labelled sub-queries."""
    kb, ob = canonical_form(project(q, build))
    kp, op = canonical_form(project(q, probe))
    return tuple(zip(op, ob)) if kb == kp else None


def count_joins(node: Node) -> int:
    if isinstance(node, Scan):
        return 0
    if isinstance(node, Extend):
        return count_joins(node.child)
    if isinstance(node, Adaptive):
        return count_joins(node.base)
    return 1 + count_joins(node.build) + count_joins(node.probe)


def walk(node: Node):
    """Post-order traversal."""
    if isinstance(node, Extend):
        yield from walk(node.child)
    elif isinstance(node, Adaptive):
        yield from walk(node.base)
    elif isinstance(node, HashJoin):
        yield from walk(node.build)
        yield from walk(node.probe)
    yield node


def is_wco(node: Node) -> bool:
    return count_joins(node) == 0


@dataclass(frozen=True)
class Plan:
    query: QueryGraph
    root: Node

    @property
    def vertices(self) -> tuple[str, ...]:
        return self.root.vertices

    @property
    def qvo(self) -> tuple[str, ...]:
        return self.root.vertices

    def signature(self) -> str:
        return self.root.signature()

    def __str__(self) -> str:
        return self.signature()


def check_plan(plan: Plan) -> None:
    """Raise ValueError unless every node satisfies the plan-space rules."""
    q = plan.query
    if plan.root.subset != frozenset(q.names):
        raise ValueError("root does not cover the query")
    for node in walk(plan.root):
        if not q.is_connected(node.subset):
            raise ValueError(f"{node.signature()} is not a connected projection")
        if isinstance(node, Scan):
            if len(node.subset) != 2:
                raise ValueError("scan must cover two vertices")
        elif isinstance(node, Extend):
            if node.target in node.child.subset:
                raise ValueError("extend target already matched")
        elif isinstance(node, Adaptive):
            if len(node.fixed) < 2 or node.orderings[0] != node.fixed:
                raise ValueError("adaptive region must start from its fixed order")
        else:
            s1, s2 = node.build.subset, node.probe.subset
            if s1 <= s2 or s2 <= s1:
                raise ValueError("hash-join child equals its parent")
            if not s1 & s2:
                raise ValueError("hash-join children share no vertex")
            if len(s1) == 2 or len(s2) == 2:
                raise ValueError("hash-join over a single edge should be an extend")
            for s, d, _ in project(q, node.subset).edges:
                if not ({s, d} <= s1 or {s, d} <= s2):
                    raise ValueError("hash-join children miss a query edge")


def _describe(node: Node) -> str:
    if isinstance(node, Scan):
        es = ", ".join(f"{s}-[:{el}]->{d}" for s, d, el in node.edges)
        return f"Scan {es}"
    if isinstance(node, Extend):
        ds = ", ".join(f"{s}:{'fwd' if d == FORWARD else 'bwd'}:{el}" for s, d, el in node.descriptors)
        return f"Extend/Intersect {node.target}:{node.dest_label} <- [{ds}]"
    if isinstance(node, Adaptive):
        orders = " | ".join(",".join(o) for o in node.orderings)
        return f"Adaptive [{orders}]"
    keys = ",".join(node.key_vertices)
    tag = " (mirror)" if node.mirror else ""
    return f"Hash-Join on ({keys}){tag}"


def explain(plan: Plan, cost_model=None) -> str:
    """Indented operator tree, root first, with estimates when a cost model is given."""
    lines = ["Sink"]

    def visit(node: Node, depth: int, role: str = "") -> None:
        text = "  " * depth + role + _describe(node)
        text += f"  {{{','.join(node.vertices)}}}"
        if cost_model is not None:
            text += f"  card={cost_model.card(node.subset):.6g} cost={cost_model.op_cost(node):.6g}"
        lines.append(text)
        if isinstance(node, Extend):
            visit(node.child, depth + 1)
        elif isinstance(node, Adaptive):
            visit(node.base, depth + 1)
        elif isinstance(node, HashJoin):
            visit(node.build, depth + 1, "build: ")
            visit(node.probe, depth + 1, "probe: ")

    visit(plan.root, 1)
    if cost_model is not None:
        lines.append(f"total cost={cost_model.cost(plan.root):.6g}")
    return "\n".join(lines)
