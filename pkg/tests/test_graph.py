import itertools
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melograph.errors import LabelingError
from melograph.graph import (
    EPSILON,
    SegmentGraph,
    from_graphml,
    from_json,
    knn_graph,
    label_nodes,
    to_dot,
    to_graphml,
    to_json,
)


def random_distances(rng, n):
    x = rng.normal(size=(n, 3))
    return np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))


def test_three_points_k1():
    d = np.array([[0, 1, 3], [1, 0, 1.5], [3, 1.5, 0]], float)
    g = knn_graph(d, 1)
    assert set(g.edges) == {(0, 1), (1, 2)}
    assert g.edges[(0, 1)] == pytest.approx(1 / (1 + EPSILON))


def test_k_n_minus_one_is_complete():
    d = random_distances(np.random.default_rng(0), 6)
    g = knn_graph(d, 5)
    assert set(g.edges) == set(itertools.combinations(range(6), 2))


def test_ties_go_to_lower_index():
    d = np.array([[0, 2, 2, 2], [2, 0, 5, 5], [2, 5, 0, 5], [2, 5, 5, 0]], float)
    g = knn_graph(d, 1)
    # node 0 keeps node 1; nodes 1..3 all pick node 0
    assert set(g.edges) == {(0, 1), (0, 2), (0, 3)}


def test_k_out_of_range():
    d = np.zeros((3, 3))
    for k in (0, 3):
        with pytest.raises(ValueError):
            knn_graph(d, k)


@given(st.integers(3, 12), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_degree_and_monotonicity(n, seed):
    d = random_distances(np.random.default_rng(seed), n)
    prev = set()
    for k in range(1, n):
        g = knn_graph(d, k)
        assert all(g.degree(v) >= k for v in range(n))
        assert prev <= set(g.edges)
        prev = set(g.edges)


def test_zero_distance_weight_finite():
    d = np.zeros((3, 3))
    g = knn_graph(d, 1)
    assert all(np.isfinite(w) and w == pytest.approx(1 / EPSILON) for w in g.edges.values())


def test_label_nodes():
    g = knn_graph(random_distances(np.random.default_rng(1), 3), 1, "p")
    lab = label_nodes(g, ["High", "Low", "Medium"], ["P", "R", "D"])
    assert lab.labels == ["High|P", "Low|R", "Medium|D"]
    by_id = label_nodes(g, {0: "High", 1: "Low", 2: "Low"}, {0: "P", 1: "P", 2: "P"})
    assert by_id.labels[2] == "Low|P"
    with pytest.raises(LabelingError):
        label_nodes(g, {0: "High", 1: "Low"}, ["P", "P", "P"])


def sample_graph():
    d = random_distances(np.random.default_rng(2), 5)
    g = knn_graph(d, 2, "s0_v1", expectancy=[0.1, 0.25, None, 0.5, 1 / 3])
    return label_nodes(g, ["Low", "High", "Medium", "Low", "Very High"], ["P", "D", "R", "P", "VR"])


def test_graphml_round_trip():
    g = sample_graph()
    back = from_graphml(to_graphml(g))
    assert back.same_as(g, rel_tol=1e-8)
    assert back.expectancy == g.expectancy


def test_graphml_nine_significant_digits():
    text = to_graphml(sample_graph())
    weights = re.findall(r'key="weight">([^<]+)<', text)
    assert weights
    for w in weights:
        digits = re.sub(r"e.*$", "", w).replace(".", "").lstrip("0")
        assert len(digits) <= 9


def test_json_round_trip_exact():
    g = sample_graph()
    back = from_json(to_json(g))
    assert back.same_as(g, rel_tol=0)


def test_single_node_exports():
    g = SegmentGraph("solo", ["Low|P"])
    assert from_graphml(to_graphml(g)).n == 1
    assert from_json(to_json(g)).labels == ["Low|P"]
    assert "n0" in to_dot(g)


def test_dot_lists_every_edge():
    g = sample_graph()
    text = to_dot(g)
    assert text.count(" -- ") == len(g.edges)
    assert text.startswith('graph "s0_v1"')


def test_subgraph_keeps_ids():
    g = sample_graph()
    sub = g.subgraph([4, 1, 3])
    assert sub.node_ids == [1, 3, 4]
    assert sub.labels == [g.labels[1], g.labels[3], g.labels[4]]
    for (u, v), w in sub.edges.items():
        assert g.edges[(sub.node_ids[u], sub.node_ids[v])] == w


def test_self_loop_rejected():
    with pytest.raises(ValueError):
        SegmentGraph("x", ["a", "b"], {(1, 1): 1.0})


def test_connectivity():
    assert SegmentGraph("x", ["a", "b", "c"], {(0, 1): 1, (1, 2): 1}).is_connected()
    assert not SegmentGraph("x", ["a", "b", "c"], {(0, 1): 1}).is_connected()
