import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from melograph.errors import DegenerateInputError
from melograph.mds import (
    classical_mds,
    joint_segment_mds,
    knn_accuracy,
    normalized_stress,
    silhouette_mean,
    smacof,
)


def dists(x):
    return np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))


def aligned_error(a, b):
    """Residual after the best orthogonal alignment of centered configurations."""
    a = a - a.mean(0)
    b = b - b.mean(0)
    u, _, vt = np.linalg.svd(b.T @ a)
    return np.abs(b @ (u @ vt) - a).max()


def test_planar_configuration_recovered():
    x = np.random.default_rng(0).normal(size=(12, 2))
    points, history = smacof(dists(x))
    assert history[-1] < 1e-10
    assert aligned_error(x, points) < 1e-5


def test_two_points_exact():
    points, history = smacof(np.array([[0, 3.0], [3.0, 0]]))
    assert np.linalg.norm(points[0] - points[1]) == pytest.approx(3.0)
    assert history[-1] == pytest.approx(0, abs=1e-12)


def test_stress_non_increasing_on_non_euclidean():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(15, 6))
    delta = dists(x) + rng.random((15, 15)) * 0.5
    delta = (delta + delta.T) / 2
    np.fill_diagonal(delta, 0)
    _, history = smacof(delta, max_iter=200, tol=0)
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    assert history[-1] < history[0]


def test_random_start_when_all_coincide():
    delta = np.ones((4, 4)) - np.eye(4)
    _, history = smacof(delta, init=np.zeros((4, 2)))
    assert history[-1] < history[0]


def test_classical_is_exact_for_euclidean():
    x = np.random.default_rng(2).normal(size=(8, 2))
    assert normalized_stress(classical_mds(dists(x)), dists(x)) < 1e-20


def test_degenerate_and_bad_input():
    with pytest.raises(DegenerateInputError):
        smacof(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        smacof(np.array([[0, 1.0], [2.0, 0]]))


def test_silhouette_matches_sklearn():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(20, 2))
    labels = rng.integers(0, 3, size=20)
    labels[:3] = [0, 1, 2]
    assert silhouette_mean(x, labels) == pytest.approx(silhouette_score(x, labels))


def test_silhouette_properties():
    x = np.array([[0, 0], [0, 0.1], [10, 0], [10, 0.1]])
    assert silhouette_mean(x, [0, 0, 1, 1]) > 0.95
    assert silhouette_mean(x, [0, 1, 0, 1]) < 0
    with pytest.raises(ValueError):
        silhouette_mean(x, [0, 0, 0, 0])


def test_knn_accuracy():
    x = np.array([[0, 0], [0, 1], [10, 0], [10, 1]])
    assert knn_accuracy(x, ["a", "a", "b", "b"]) == 1.0
    assert knn_accuracy(x, ["a", "b", "a", "b"]) == 0.0


def test_joint_mds_separates_planted_groups():
    rng = np.random.default_rng(4)
    x = np.vstack([rng.normal(0, 0.3, size=(6, 2)), rng.normal(5, 0.3, size=(6, 2))])
    res = joint_segment_mds(dists(x), ["a"] * 6 + ["b"] * 6)
    assert res.knn_accuracy == 1.0
    assert res.silhouette_mean > 0.8
    assert res.points.shape == (12, 2)
    assert res.stress == res.stress_history[-1]
