"""Acceptance suite: one test and one reported PASS/FAIL line per criterion."""

import os
import time
from fractions import Fraction

import numpy as np
import pytest

from hybridjoin.catalogue import build_catalogue, estimate_cardinality
from hybridjoin.cost_model import CostModel
from hybridjoin.datasets import (ASYMMETRIC_TRIANGLE, DIAMOND_X, SHAPES, clustered_graph, g0, named_query,
                                 random_graph, random_walk_queries, shape, skewed_graph, triads)
from hybridjoin.executor import ICOST_UNMATCHED, execute, execute_parallel, make_adaptive, reestimate
from hybridjoin.oracle import brute_force_count, q_error
from hybridjoin.planner import enumerate_spectrum, optimize, wco_orderings, wco_plan
from hybridjoin.plans import Extend, HashJoin

from conftest import record

ALPHABET = ("A", "B", "C")
SMALL = ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"]
MID = ["Q8", "Q11"]
LARGE = ["Q12", "Q13"]
ORACLE_GRAPHS = 200
MID_FULL_GRAPHS = 25
MID_STRIDE = 25
FULL = os.environ.get("HYBRIDJOIN_FULL_ORACLE") == "1"


def edge_count(g):
    return sum(1 for _ in g.edges())


def random_labels(name, vl, el, rng):
    edges = SHAPES[name]
    m = max(max(e) for e in edges)
    return named_query(name, vertex_labels={k: vl[int(rng.integers(len(vl)))] for k in range(1, m + 1)},
                       edge_labels=[el[int(rng.integers(len(el)))] for _ in edges])


def uniform_labels(name, label="A"):
    edges = SHAPES[name]
    m = max(max(e) for e in edges)
    return named_query(name, vertex_labels={k: label for k in range(1, m + 1)}, edge_labels=[label] * len(edges))


def oracle_graph(i):
    rng = np.random.default_rng(10_000 + i)
    p = float(rng.uniform(0.05, 0.4))
    # dense draws get fewer vertices so the expected degree stays small
    n = int(rng.integers(6, min(30, int(2.5 / p) + 4) + 1))
    vl = ALPHABET[:int(rng.integers(1, 4))]
    el = ALPHABET[:int(rng.integers(1, 4))]
    return random_graph(n, p, vertex_labels=vl, edge_labels=el, seed=i), vl, el, rng


# -- 1 ---------------------------------------------------------------------

def test_c1_spectrum_plans_match_brute_force():
    t0 = time.perf_counter()
    graphs = [oracle_graph(i) for i in range(ORACLE_GRAPHS)]
    runs, failures = 0, []
    cross_product = 0
    covered: dict[str, int] = {}

    def check(name, plan, g, truth, where):
        nonlocal runs
        runs += 1
        got = execute(plan, g).count
        if got != truth:
            failures.append((name, where, plan.signature(), got, truth))

    cats = [build_catalogue(g, h=2, z=50, seed=i) for i, (g, *_) in enumerate(graphs)]
    for i, (g, vl, el, rng) in enumerate(graphs):
        for name in SMALL + MID:
            q = random_labels(name, vl, el, rng)
            truth = brute_force_count(q, g)
            spectrum = enumerate_spectrum(q, cats[i])
            cross_product += len(spectrum)
            if name in SMALL or i < MID_FULL_GRAPHS or FULL:
                chosen = [rp.plan for rp in spectrum]
            else:
                chosen = [optimize(q, cats[i])] + [rp.plan for rp in spectrum[i % MID_STRIDE::MID_STRIDE]]
            for plan in chosen:
                check(name, plan, g, truth, i)
            covered[name] = covered.get(name, 0) + len(chosen)

    for name in LARGE:
        q = uniform_labels(name)
        spectrum = [rp.plan for rp in enumerate_spectrum(q, cats[0])]
        cross_product += len(spectrum) * len(graphs)
        truths = [brute_force_count(q, g) for g, *_ in graphs]
        pool = [i for i, t in enumerate(truths) if t > 0] or list(range(len(graphs)))
        for i, (g, *_) in enumerate(graphs):
            check(name, optimize(q, cats[i]), g, truths[i], i)
        if FULL:
            for i, (g, *_) in enumerate(graphs):
                for plan in spectrum:
                    check(name, plan, g, truths[i], i)
        else:
            # every plan runs at least once, on a graph where the query has matches
            for j, plan in enumerate(spectrum):
                i = pool[j % len(pool)]
                check(name, plan, graphs[i][0], truths[i], i)
        covered[name] = len(spectrum) * (len(graphs) if FULL else 1) + len(graphs)

    elapsed = time.perf_counter() - t0
    per_run = elapsed / max(runs, 1)
    detail = (f"{len(graphs)} graphs, {runs} plan runs, {len(failures)} mismatches, {elapsed:.0f}s; "
              f"runs per query {covered}")
    if failures:
        record("1", f"[1] FAIL oracle equivalence: {detail}; first {failures[0]}")
        pytest.fail(f"{len(failures)} plans disagree with brute force: {failures[:5]}")
    if FULL:
        record("1", f"[1] PASS oracle equivalence (every plan x every graph): {detail}")
        return
    hours = cross_product * per_run / 3600
    record("1", f"[1] FAIL (literal) oracle equivalence: no mismatches, every spectrum plan ran on at least one "
                f"graph and every graph ran every query, but the full plan x graph product ({cross_product} runs, "
                f"~{hours:.1f}h here) exceeds the minutes budget; {detail}")
    pytest.xfail("every plan on every graph is outside the runtime budget; set HYBRIDJOIN_FULL_ORACLE=1")


# -- 2 ---------------------------------------------------------------------

def test_c2_triads_fixed_versus_adaptive():
    n = 1000
    g = triads(n)
    cat = build_catalogue(g, h=3, z=10_000)
    plan = wco_plan(shape(DIAMOND_X), ("a2", "a3", "a4", "a1"))
    t0 = time.perf_counter()
    fixed = execute(plan, g, icost_mode=ICOST_UNMATCHED, catalogue=cat)
    adaptive = execute(plan, g, icost_mode=ICOST_UNMATCHED, catalogue=cat, adaptive=True)
    elapsed = time.perf_counter() - t0
    f, a = fixed.stats.icost_actual, adaptive.stats.icost_actual
    ok = abs(f - 3 * n) <= 0.05 * 3 * n and abs(a - n) <= 0.05 * n and elapsed < 1.0
    record("2", f"[2] {'PASS' if ok else 'FAIL'} triads n={n}: fixed i-cost {f} (target {3 * n}), "
                f"adaptive {a} (target {n}), +-5%, {elapsed:.2f}s")
    assert f == pytest.approx(3 * n, rel=0.05)
    assert a == pytest.approx(n, rel=0.05)
    assert elapsed < 1.0


# -- 3 ---------------------------------------------------------------------

def test_c3_reestimate_example():
    as_float = reestimate(10, (100, 2000), (50, 200))
    as_fraction = reestimate(Fraction(10), (Fraction(100), Fraction(2000)), (Fraction(50), Fraction(200)))
    ok = as_float == (250, 0.5) and as_fraction == (250, Fraction(1, 2))
    record("3", f"[3] {'PASS' if ok else 'FAIL'} re-estimation: float {as_float}, exact {as_fraction}")
    assert as_float == (250, 0.5)
    assert as_fraction == (250, Fraction(1, 2))


# -- 4 ---------------------------------------------------------------------

def test_c4_dp_matches_exhaustive_minimum():
    worst, checked = 0.0, 0
    bad = []
    for i in range(20):
        rng = np.random.default_rng(2000 + i)
        vl = ALPHABET[:int(rng.integers(1, 3))]
        el = ALPHABET[:int(rng.integers(1, 3))]
        g = random_graph(int(rng.integers(12, 26)), float(rng.uniform(0.08, 0.3)), vertex_labels=vl,
                         edge_labels=el, seed=2000 + i)
        cat = build_catalogue(g, h=3, z=200, seed=i)
        for name in SMALL + MID + LARGE:
            q = random_labels(name, vl, el, rng)
            cm = CostModel(q, cat)
            best = enumerate_spectrum(q, cat, cost_model=cm)[0].cost
            dp = cm.cost(optimize(q, cat, cost_model=cm).root)
            gap = abs(dp - best) / max(abs(best), 1e-12)
            worst = max(worst, gap)
            checked += 1
            if gap > 1e-9:
                bad.append((i, name, dp, best))
    record("4", f"[4] {'PASS' if not bad else 'FAIL'} DP optimality: {checked} (graph, query) pairs over 20 graphs, "
                f"max relative gap {worst:.1e}")
    assert not bad, bad[:5]


# -- 5 ---------------------------------------------------------------------

def test_c5_cache_on_diamond_x():
    g = clustered_graph(2000, 4000, 2000, seed=0)
    m = edge_count(g)
    assert m >= 5000
    q = shape(DIAMOND_X)
    rows = []
    for qvo in wco_orderings(q):
        plan = wco_plan(q, qvo)
        last = plan.root
        assert isinstance(last, Extend)
        if {src for src, _, _ in last.descriptors} != set(qvo[:2]):
            continue
        on, off = execute(plan, g, "stream", cache=True), execute(plan, g, "stream", cache=False)
        rows.append(("".join(qvo), on.stats.cache_hits, on.stats.icost_actual, off.stats.icost_actual,
                     sorted(on.matches) == sorted(off.matches)))
    ok = len(rows) == 2 and all(h > 0 and a < b and same for _, h, a, b, same in rows)
    desc = "; ".join(f"{o}: hits {h}, i-cost on {a} < off {b}" for o, h, a, b, _ in rows)
    record("5", f"[5] {'PASS' if ok else 'FAIL'} cache on diamond-X ({m} edges): {desc}")
    assert len(rows) == 2
    for _, hits, on_cost, off_cost, same in rows:
        assert hits > 0 and on_cost < off_cost and same


# -- 6 ---------------------------------------------------------------------

def _best_time(plan, g, runs=2, **kw):
    best, result = float("inf"), None
    for _ in range(runs):
        t0 = time.perf_counter()
        result = execute(plan, g, **kw)
        best = min(best, time.perf_counter() - t0)
    return best, result


def test_c6_icost_ranks_runtime():
    g = skewed_graph(20_000, 100_000, alpha=1.6, min_out=2, seed=0)
    assert edge_count(g) >= 100_000
    q = shape(ASYMMETRIC_TRIANGLE)
    qvos = [("a1", "a2", "a3"), ("a2", "a3", "a1"), ("a1", "a3", "a2")]
    merge, gallop, icost, counts = {}, {}, {}, set()
    for qvo in qvos:
        plan = wco_plan(q, qvo)
        merge[qvo], res = _best_time(plan, g, gallop=False)
        gallop[qvo], _ = _best_time(plan, g, runs=1)
        icost[qvo] = res.stats.icost_actual
        counts.add(res.count)
    assert len(counts) == 1
    # pairs whose i-costs differ by under 10% are ties as far as the model can tell
    material = [(a, b) for a in qvos for b in qvos if icost[a] * 1.1 < icost[b]]
    agree = all(merge[a] < merge[b] for a, b in material)
    strict = sorted(qvos, key=icost.get) == sorted(qvos, key=merge.get)
    gallop_strict = sorted(qvos, key=icost.get) == sorted(qvos, key=gallop.get)
    cols = "; ".join(f"{''.join(o)}: i-cost {icost[o]}, merge {merge[o]:.2f}s, gallop {gallop[o]:.2f}s" for o in qvos)
    record("6", f"[6] {'PASS' if agree else 'FAIL'} (tie-aware) i-cost ranks merge runtime on {len(material)} "
                f"distinguishable pairs; strict 3-way order {'agrees' if strict else 'differs'} (merge), "
                f"{'agrees' if gallop_strict else 'differs'} (gallop); {cols}")
    assert material
    assert agree


# -- 7 ---------------------------------------------------------------------

def test_c7_exhaustive_catalogue_is_exact():
    checked, bad = 0, []
    for seed in range(30):
        rng = np.random.default_rng(seed)
        vl = ALPHABET[:int(rng.integers(1, 4))]
        el = ("x", "y")[:int(rng.integers(1, 3))]
        g = random_graph(int(rng.integers(4, 13)), float(rng.uniform(0.05, 0.4)), vertex_labels=vl,
                         edge_labels=el, seed=seed)
        for h in (2, 3):
            cat = build_catalogue(g, h=h, z=10 ** 6)
            queries = [random_labels(n, vl, el, rng) for n, es in SHAPES.items()
                       if max(max(e) for e in es) <= h + 1]
            for size in range(3, h + 2):
                queries += random_walk_queries(g, 3, size, seed=seed)
            for q in queries:
                est, truth = estimate_cardinality(cat, q), brute_force_count(q, g)
                checked += 1
                if est != truth or q_error(est, truth) != 1:
                    bad.append((seed, h, q, est, truth))
    record("7", f"[7] {'PASS' if not bad else 'FAIL'} catalogue exactness: {checked} queries of at most h+1 "
                f"vertices on 30 graphs, h in {{2,3}}, {len(bad)} with q-error above 1")
    assert not bad, bad[:3]


# -- 8 ---------------------------------------------------------------------

def test_c8_qerror_improves_with_h():
    g = random_graph(1500, 0.0045, vertex_labels=ALPHABET, edge_labels=("x", "y"), seed=7)
    assert edge_count(g) >= 10_000
    queries = random_walk_queries(g, 100, 5, seed=1)
    assert len(queries) >= 100
    truths = [brute_force_count(q, g) for q in queries]
    within, entries = {}, {}
    for h in (2, 3):
        cat = build_catalogue(g, h=h, z=100, seed=0)
        entries[h] = len(cat.entries)
        within[h] = sum(q_error(estimate_cardinality(cat, q), t) <= 5 for q, t in zip(queries, truths))
    ok = within[3] >= within[2] and entries[3] > entries[2]
    record("8", f"[8] {'PASS' if ok else 'FAIL'} q-error vs h on {len(queries)} queries: q-error<=5 for "
                f"{within[2]} (h=2) -> {within[3]} (h=3); entries {entries[2]} -> {entries[3]}")
    assert within[3] >= within[2]
    assert entries[3] > entries[2]


# -- 9 ---------------------------------------------------------------------

def _fixtures():
    yield "g0", g0(label="_", edge_label="_")
    yield "triads", triads(200)
    yield "random", random_graph(18, 0.25, seed=7)
    yield "labelled", random_graph(30, 0.15, vertex_labels=("_", "B"), edge_labels=("_", "y"), seed=3)
    yield "clustered", clustered_graph(300, 400, 300, seed=1)


def _hybrids(cat):
    out = []
    for name in ("Q4", "Q12"):
        for rp in enumerate_spectrum(named_query(name), cat):
            if any(isinstance(n, HashJoin) for n in (rp.plan.root, getattr(rp.plan.root, "child", None))):
                out.append(rp.plan)
                break
    return out


def test_c9_parallel_counts_equal_serial():
    checked, bad = 0, []
    for fname, g in _fixtures():
        cat = build_catalogue(g, h=3, z=500, seed=0)
        plans = [optimize(named_query(n), cat) for n in SMALL + MID + LARGE] + _hybrids(cat)
        plans.append(make_adaptive(optimize(named_query("Q4"), cat)))
        for plan in plans:
            serial = execute(plan, g, catalogue=cat).count
            for workers in (1, 2, 4):
                checked += 1
                got = execute_parallel(plan, g, workers, catalogue=cat, partitions=3, chunk=3).count
                if got != serial:
                    bad.append((fname, plan.signature(), workers, got, serial))
    record("9", f"[9] {'PASS' if not bad else 'FAIL'} parallel counts: {checked} runs over 5 fixtures with "
                f"workers 1/2/4, {len(bad)} differ from serial")
    assert not bad, bad[:3]


# -- 10 --------------------------------------------------------------------

def test_c10_hybrid_shapes_in_spectrum():
    cat = build_catalogue(random_graph(30, 0.12, seed=11), h=3, z=300, seed=1)
    cycle = [rp.plan.root for rp in enumerate_spectrum(named_query("Q12"), cat)]
    non_ghd = [r for r in cycle if isinstance(r, Extend) and isinstance(r.child, HashJoin)
               and len(r.child.build.subset) == 3 and len(r.child.probe.subset) == 3]
    triangles = {frozenset({"a1", "a2", "a3"}), frozenset({"a2", "a3", "a4"})}
    diamond = [rp.plan.root for rp in enumerate_spectrum(shape(DIAMOND_X), cat)]
    two_triangle = [r for r in diamond if isinstance(r, HashJoin)
                    and {r.build.subset, r.probe.subset} == triangles]
    ok = bool(non_ghd) and bool(two_triangle)
    record("10", f"[10] {'PASS' if ok else 'FAIL'} hybrid shapes: 6-cycle has {len(non_ghd)} E/I-over-join plans "
                 f"of two 3-paths, diamond-X has {len(two_triangle)} two-triangle joins")
    assert non_ghd and two_triangle
