import pytest
from hypothesis import given, settings, strategies as st

from hybridjoin.datasets import SYMMETRIC_TRIANGLE, shape
from hybridjoin.query import (QuerySyntaxError, QueryValidationError, canonicalize, make_query, parse_query,
                              project, relabel)

DX = "(a1)-[:E]->(a2),(a1)-[:E]->(a3),(a2)-[:E]->(a3),(a2)-[:E]->(a4),(a3)-[:E]->(a4)"


def test_parse_triangle():
    q = parse_query("(a1)-[:E]->(a2),(a2)-[:E]->(a3),(a1)-[:E]->(a3)")
    assert len(q) == 3 and len(q.edges) == 3


def test_parse_diamond_x():
    q = parse_query(DX)
    assert q.names == ("a1", "a2", "a3", "a4")
    assert q.edges == {("a1", "a2", "E"), ("a1", "a3", "E"), ("a2", "a3", "E"),
                       ("a2", "a4", "E"), ("a3", "a4", "E")}


def test_parse_labels():
    q = parse_query("(a:Person)-[:KNOWS]->(b:Person), (b)-[]->(c)")
    assert q.labels == {"a": "Person", "b": "Person", "c": "_"}
    assert ("b", "c", "_") in q.edges


def test_disconnected_rejected():
    with pytest.raises(QueryValidationError):
        parse_query("(a1)-[:E]->(a2),(a3)-[:E]->(a4)")


@pytest.mark.parametrize("text", ["", "(a)", "(a)-[:E]->", "(a)-[:E]->(b)(c)", "(a)-[:E]-(b)", "(1a)-[:E]->(b)"])
def test_syntax_errors(text):
    with pytest.raises(QuerySyntaxError) as info:
        parse_query(text)
    assert info.value.position >= 1


def test_conflicting_labels():
    with pytest.raises(QuerySyntaxError):
        parse_query("(a:X)-[:E]->(b),(a:Y)-[:E]->(b)")


def test_self_loop_and_duplicate_rejected():
    with pytest.raises(QueryValidationError):
        parse_query("(a)-[:E]->(a)")
    with pytest.raises(QueryValidationError):
        parse_query("(a)-[:E]->(b),(a)-[:E]->(b)")


def test_round_trip_text():
    q = parse_query(DX)
    assert parse_query(q.to_text()) == q


def test_project_triangle():
    q = parse_query(DX)
    p = project(q, {"a1", "a2", "a3"})
    assert p.edges == {("a1", "a2", "E"), ("a1", "a3", "E"), ("a2", "a3", "E")}


def test_project_without_edges_and_identity():
    q = parse_query(DX)
    assert project(q, {"a1", "a4"}).edges == frozenset()
    assert project(q, q.names) == q
    with pytest.raises(ValueError):
        project(q, set())
    with pytest.raises(ValueError):
        project(q, {"zz"})


def test_canonical_rename_invariance():
    a = parse_query("(a1)-[:E]->(a2),(a2)-[:E]->(a3),(a1)-[:E]->(a3)")
    b = parse_query("(z)-[:E]->(y),(x)-[:E]->(z),(x)-[:E]->(y)")
    assert canonicalize(a) == canonicalize(b)


def test_asymmetric_vs_symmetric_triangle():
    a = parse_query("(a1)-[:E]->(a2),(a2)-[:E]->(a3),(a1)-[:E]->(a3)")
    assert canonicalize(a) != canonicalize(shape(SYMMETRIC_TRIANGLE, edge_labels=["E"] * 3))


def test_labels_break_symmetry():
    a = parse_query("(u:la)-[:lx]->(v:lb)")
    b = parse_query("(u:lb)-[:lx]->(v:la)")
    assert canonicalize(a) != canonicalize(b)


def test_distinguished_vertex_matters():
    q = parse_query("(a)-[:E]->(b)")
    assert canonicalize(q, "a") != canonicalize(q, "b")
    assert canonicalize(q) != canonicalize(q, "a")
    with pytest.raises(ValueError):
        canonicalize(q, "c")


edge_lists = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.sampled_from("XY")),
                      min_size=1, max_size=8)


@settings(max_examples=150, deadline=None)
@given(edge_lists, st.permutations(range(5)), st.lists(st.sampled_from("AB"), min_size=5, max_size=5))
def test_canonical_key_invariant_under_renaming(raw, perm, vlabels):
    edges = {(f"v{s}", f"v{d}", el) for s, d, el in raw if s != d}
    if not edges:
        return
    q = make_query(sorted(edges), {f"v{i}": vlabels[i] for i in range(5)}, validate=False)
    mapping = {f"v{i}": f"w{perm[i]}" for i in range(5)}
    r = relabel(q, mapping)
    # reversed declaration order as well
    r = type(r)(tuple(reversed(r.vertices)), r.edges)
    assert canonicalize(q) == canonicalize(r)
    first = q.names[0]
    assert canonicalize(q, first) == canonicalize(r, mapping[first])
