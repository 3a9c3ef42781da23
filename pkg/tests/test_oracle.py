import math

import pytest

from hybridjoin.datasets import random_graph, shape
from hybridjoin.graph_store import Graph
from hybridjoin.oracle import OracleGuardExceeded, brute_force_count, brute_force_tuples, exact_mu, q_error


def test_triangle_on_g0(G0, triangle_q):
    assert brute_force_count(triangle_q, G0) == 2
    assert brute_force_tuples(triangle_q, G0, ("a1", "a2", "a3")) == [(0, 1, 2), (1, 2, 3)]


def test_diamond_on_g0(G0, diamond_q):
    assert brute_force_count(diamond_q, G0) == 1


def test_empty_graph(triangle_q):
    assert brute_force_count(triangle_q, Graph.from_edges(["P"] * 3, [])) == 0


def test_homomorphism_vs_injective():
    # a 2-cycle folds a 4-path onto itself only when vertices may repeat
    g = Graph.from_edges(["_", "_"], [(0, 1), (1, 0)])
    q = shape([(1, 2), (2, 3), (3, 4)])
    assert brute_force_count(q, g) == 2
    assert brute_force_count(q, g, "injective") == 0
    with pytest.raises(ValueError):
        brute_force_count(q, g, "bogus")


def test_guard():
    q = shape([(i, i + 1) for i in range(1, 10)])
    g = random_graph(5, 0.3, seed=0)
    with pytest.raises(OracleGuardExceeded):
        brute_force_count(q, g)
    assert brute_force_count(q, g, force=True) >= 0


def test_exact_mu(G0, triangle_q):
    assert exact_mu(triangle_q, G0, {"a1", "a2"}, "a3") == pytest.approx(0.4)


@pytest.mark.parametrize("est, truth, expected", [(10, 5, 2), (5, 10, 2), (7, 7, 1), (0, 0, 1)])
def test_q_error(est, truth, expected):
    assert q_error(est, truth) == expected


def test_q_error_zero_one_side():
    assert math.isinf(q_error(0, 3)) and math.isinf(q_error(3, 0))
    with pytest.raises(ValueError):
        q_error(-1, 2)
