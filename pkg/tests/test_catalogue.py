import random

import pytest
from hypothesis import given, settings, strategies as st

from hybridjoin.catalogue import (Catalogue, CatalogueEntry, CatalogueFormatError, build_catalogue,
                                  estimate_cardinality, estimate_extension, estimate_mu, extension_key,
                                  load_catalogue, lookup, save_catalogue)
from hybridjoin.datasets import SHAPES, random_graph, shape
from hybridjoin.graph_store import BACKWARD, FORWARD, Graph
from hybridjoin.oracle import brute_force_count
from hybridjoin.query import make_query, project

from conftest import labelled


@pytest.fixture
def cat0(G0):
    return build_catalogue(G0, h=2, z=5)


def test_base_counts(cat0):
    assert cat0.base_counts == {("E", "P", "P"): 5}
    assert cat0.vertex_label_counts == {"P": 4}


def test_edge_to_triangle_entry(cat0):
    edge = make_query([("a1", "a2", "E")], {"a1": "P", "a2": "P"})
    e = lookup(cat0, edge, [("a1", FORWARD, "E"), ("a2", FORWARD, "E")], "P")
    assert e.mu == pytest.approx(0.4)
    assert e.sample_support == 5
    # out-degrees over sources (0,0,1,1,2) and over destinations (1,2,2,3,3)
    assert e.avg_list_sizes[("a1", FORWARD, "E")] == pytest.approx(9 / 5)
    assert e.avg_list_sizes[("a2", FORWARD, "E")] == pytest.approx(4 / 5)


def test_single_descriptor_mu_is_average_list_size(cat0):
    edge = make_query([("a1", "a2", "E")], {"a1": "P", "a2": "P"})
    e = lookup(cat0, edge, [("a2", FORWARD, "E")], "P")
    assert e.mu == pytest.approx(e.avg_list_sizes[("a2", FORWARD, "E")])


def test_lookup_bounds(cat0, triangle_q):
    assert lookup(cat0, triangle_q, [("a3", FORWARD, "E")], "P") is None
    edge = make_query([("a1", "a2", "E")], {"a1": "P", "a2": "P"})
    assert lookup(cat0, edge, [("a1", FORWARD, "E")], "NOPE") is None
    assert estimate_mu(cat0, edge, [("a1", FORWARD, "E")], "NOPE") == 0


def test_lookup_is_invariant_to_vertex_names(cat0):
    e1 = make_query([("a1", "a2", "E")], {"a1": "P", "a2": "P"})
    e2 = make_query([("x", "y", "E")], {"x": "P", "y": "P"})
    m1 = lookup(cat0, e1, [("a1", FORWARD, "E"), ("a2", FORWARD, "E")], "P")
    m2 = lookup(cat0, e2, [("y", FORWARD, "E"), ("x", FORWARD, "E")], "P")
    assert m1.key == m2.key and m1.mu == m2.mu


def test_missing_key_within_h_means_zero():
    # a DAG has no directed cycles, so the cyclic extension never occurs
    dag = Graph.from_edges(["_"] * 6, [(i, j) for i in range(6) for j in range(i + 1, 6)])
    c = build_catalogue(dag, h=2, z=1000)
    path = make_query([("a1", "a2"), ("a2", "a3")])
    descs = [("a1", FORWARD, "_"), ("a2", BACKWARD, "_"), ("a3", FORWARD, "_")]
    assert estimate_extension(c, path, descs, "_").mu == 0.0
    triangle_edge = make_query([("a1", "a2")])
    assert estimate_mu(c, triangle_edge, [("a1", FORWARD, "_"), ("a2", FORWARD, "_")], "_") > 0
    assert estimate_mu(c, triangle_edge, [("a1", BACKWARD, "_"), ("a2", FORWARD, "_")], "_") == 0


def test_reduction_takes_minimum():
    path = make_query([("a", "b"), ("b", "c")])
    c = Catalogue(h=2, z=10, base_counts={("_", "_", "_"): 10}, vertex_label_counts={"_": 5})
    for kept, desc, mu in ((("a", "b"), ("a", FORWARD, "_"), 3.0), (("b", "c"), ("c", FORWARD, "_"), 1.2)):
        key, canon = extension_key(project(path, kept), [desc], "_")
        c.entries[key] = CatalogueEntry(key, (canon[desc],), "_", mu, {canon[desc]: mu}, 10)
    descs = [("a", FORWARD, "_"), ("c", FORWARD, "_")]
    assert estimate_mu(c, path, descs, "_") == 1.2


def test_reduction_fallback_is_flagged():
    c = Catalogue(h=2, z=10, base_counts={("_", "_", "_"): 4}, vertex_label_counts={"_": 4})
    path = make_query([("a", "b"), ("b", "c")])
    est = estimate_extension(c, path, [("b", FORWARD, "_")], "_")
    assert est.mu == 0.0  # the 2-vertex reduction is authoritative and missing
    star = make_query([("a", "b"), ("a", "c"), ("a", "d")])
    c3 = Catalogue(h=2, z=10, base_counts={("_", "_", "_"): 4}, vertex_label_counts={"_": 4})
    est = estimate_extension(c3, star, [("b", FORWARD, "_"), ("c", FORWARD, "_")], "_")
    assert est.mu == 0.0 and not est.low_confidence


def test_estimate_cardinality_g0(cat0, G0, triangle_q):
    edge = make_query([("a1", "a2", "E")], {"a1": "P", "a2": "P"})
    assert estimate_cardinality(cat0, edge) == 5
    assert estimate_cardinality(cat0, triangle_q) == 2.0 == brute_force_count(triangle_q, G0)


def test_zero_extension_annihilates(cat0):
    q = labelled([(1, 2), (2, 3), (3, 1)])
    assert estimate_cardinality(cat0, q) == 0


def test_h_controls_entry_growth():
    g = random_graph(15, 0.15, seed=3)
    sizes = [len(build_catalogue(g, h=h, z=200)) for h in (2, 3, 4)]
    assert sizes[0] < sizes[1] < sizes[2]


def test_deterministic_under_seed():
    g = random_graph(60, 0.1, seed=5)
    assert build_catalogue(g, h=3, z=20, seed=9) == build_catalogue(g, h=3, z=20, seed=9)


def test_round_trip(tmp_path, cat0):
    p = tmp_path / "c.cat"
    save_catalogue(cat0, p)
    assert load_catalogue(p) == cat0


def test_round_trip_labelled(tmp_path):
    g = random_graph(20, 0.2, vertex_labels=("A", "B b"), edge_labels=("x", "y\tz"), seed=1)
    c = build_catalogue(g, h=3, z=50)
    save_catalogue(c, tmp_path / "c.cat")
    assert load_catalogue(tmp_path / "c.cat") == c


def test_empty_catalogue_is_header_only(tmp_path):
    c = build_catalogue(Graph.from_edges([], []), h=2)
    save_catalogue(c, tmp_path / "e.cat")
    assert (tmp_path / "e.cat").read_text().strip().splitlines() == ["catalogue v1 h=2 z=1000 seed=0"]
    assert load_catalogue(tmp_path / "e.cat") == c


@pytest.mark.parametrize("text", ["catalogue v9 h=2 z=5 seed=0\n", "nonsense\n", "",
                                  "catalogue v1 h=2 z=5 seed=0\nbogus\t1\n",
                                  "catalogue v1 h=2 z=5 seed=0\nbase\tzz\n"])
def test_bad_files(tmp_path, text):
    p = tmp_path / "bad.cat"
    p.write_text(text)
    with pytest.raises(CatalogueFormatError):
        load_catalogue(p)


def test_invalid_parameters(G0):
    with pytest.raises(ValueError):
        build_catalogue(G0, h=1)
    with pytest.raises(ValueError):
        build_catalogue(G0, z=0)


SMALL = [n for n, es in SHAPES.items() if max(max(e) for e in es) <= 4]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 3))
def test_exhaustive_sampling_is_exact(seed, h):
    rng = random.Random(seed)
    vl = ("A", "B", "C")[:rng.randint(1, 3)]
    el = ("x", "y")[:rng.randint(1, 2)]
    g = random_graph(rng.randint(4, 12), rng.uniform(0.05, 0.4), vertex_labels=vl, edge_labels=el, seed=seed)
    c = build_catalogue(g, h=h, z=10 ** 6)
    for name in SMALL:
        edges = SHAPES[name]
        m = max(max(e) for e in edges)
        if m > h + 1:
            continue
        q = shape(edges, vertex_labels={i: rng.choice(vl) for i in range(1, m + 1)},
                  edge_labels=[rng.choice(el) for _ in edges])
        assert estimate_cardinality(c, q) == brute_force_count(q, g)
