import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melograph.errors import GraphTooSmallError
from melograph.graph import SegmentGraph, knn_graph
from melograph.partition import cut_cost, kl_bisect, kl_partition


def two_cliques(bridge=0.1):
    edges = {}
    for block in ((0, 1, 2), (3, 4, 5)):
        for u, v in itertools.combinations(block, 2):
            edges[(u, v)] = 1.0
    edges[(2, 3)] = bridge
    return SegmentGraph("cc", ["x"] * 6, edges)


def exhaustive_min_cut(graph):
    w = graph.weight_matrix()
    n = graph.n
    best = np.inf
    for a in itertools.combinations(range(n), n // 2):
        side = np.ones(n, dtype=np.int8)
        side[list(a)] = 0
        best = min(best, cut_cost(w, side))
    return best


def test_two_cliques_match_exhaustive_search():
    g = two_cliques()
    assert exhaustive_min_cut(g) == pytest.approx(0.1)
    for seed in range(10):
        part = kl_partition(g, seed)
        assert part.cut == pytest.approx(0.1)
        assert {frozenset(part.part_a), frozenset(part.part_b)} == {frozenset({0, 1, 2}), frozenset({3, 4, 5})}


def test_too_small():
    with pytest.raises(GraphTooSmallError):
        kl_partition(SegmentGraph("t", ["a"] * 3, {(0, 1): 1, (1, 2): 1}))


@given(st.integers(4, 16), st.integers(0, 10_000), st.integers(0, 5))
@settings(max_examples=50, deadline=None)
def test_balance_and_cut_never_increases(n, graph_seed, seed):
    rng = np.random.default_rng(graph_seed)
    x = rng.normal(size=(n, 2))
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    g = knn_graph(d, int(rng.integers(1, n)))
    part = kl_partition(g, seed)
    assert abs(len(part.part_a) - len(part.part_b)) <= 1
    assert sorted(part.part_a + part.part_b) == list(range(n))
    assert part.cut <= part.initial_cut + 1e-9
    assert all(b <= a + 1e-9 for a, b in zip(part.cut_history, part.cut_history[1:]))
    assert part.cut == pytest.approx(cut_cost(g.weight_matrix(), np.isin(np.arange(n), part.part_b)))


def test_small_graphs_reach_exhaustive_optimum_often():
    hits = 0
    for s in range(20):
        rng = np.random.default_rng(s)
        x = rng.normal(size=(8, 2))
        d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
        g = knn_graph(d, 2)
        hits += kl_partition(g, 0).cut <= exhaustive_min_cut(g) + 1e-9
    assert hits >= 12


def test_deterministic_under_seed():
    g = two_cliques(0.5)
    assert kl_partition(g, 3) == kl_partition(g, 3)


def test_bisect_returns_induced_subgraphs():
    a, b = kl_bisect(two_cliques())
    assert a.n + b.n == 6
    assert len(a.edges) == 3 and len(b.edges) == 3
