import numpy as np
import pytest
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score

from melograph.embed import graph2vec_train, kmeans, pca_2d


def family_documents(seed, per_family=4, length=40):
    rng = np.random.default_rng(seed)
    docs, fam = [], []
    for f in range(2):
        vocab = [f"f{f}_{i}" for i in range(8)] + [f"shared_{i}" for i in range(4)]
        weights = np.array([3.0] * 8 + [1.0] * 4)
        for _ in range(per_family):
            docs.append(rng.choice(vocab, size=length, p=weights / weights.sum()).tolist())
            fam.append(f)
    return docs, np.array(fam)


def cos(a, b):
    return a @ b / (np.linalg.norm(a) * np.linalg.norm(b))


@pytest.mark.parametrize("seed", range(5))
def test_graph2vec_separates_families(seed):
    docs, fam = family_documents(seed)
    model = graph2vec_train(docs, dim=16, epochs=40, seed=seed)
    v = model.vectors
    within, between = [], []
    for i in range(len(docs)):
        for j in range(i + 1, len(docs)):
            (within if fam[i] == fam[j] else between).append(cos(v[i], v[j]))
    assert np.mean(within) - np.mean(between) > 0.2


def test_graph2vec_shape_loss_and_determinism():
    docs, _ = family_documents(0, per_family=2)
    a = graph2vec_train(docs, dim=16, epochs=15, seed=1)
    b = graph2vec_train(docs, dim=16, epochs=15, seed=1)
    assert a.vectors.shape == (4, 16)
    assert np.array_equal(a.vectors, b.vectors)
    assert a.loss_history[-1] < a.loss_history[0]
    assert a.params["dim"] == 16
    with pytest.raises(ValueError):
        graph2vec_train([["x"]])


def blobs(seed, k=3, per=10, spread=0.3):
    rng = np.random.default_rng(seed)
    centers = np.eye(4)[:k] * 8 + rng.normal(0, 1, size=(k, 4))
    x = np.vstack([c + rng.normal(0, spread, size=(per, 4)) for c in centers])
    return x, np.repeat(np.arange(k), per)


def test_kmeans_recovers_blobs():
    x, truth = blobs(0)
    res = kmeans(x, 3, seed=0)
    assert adjusted_rand_score(truth, res.labels) == 1.0
    assert all(b <= a + 1e-9 for a, b in zip(res.inertia_history, res.inertia_history[1:]))


def test_kmeans_agrees_with_sklearn():
    for seed in range(5):
        x, truth = blobs(seed, k=4, spread=1.0)
        ours = kmeans(x, 4, seed=seed).labels
        ref = KMeans(4, n_init=10, random_state=seed).fit_predict(x)
        assert adjusted_rand_score(ref, ours) >= 0.9


def test_kmeans_edge_cases():
    x = np.arange(10, dtype=float).reshape(5, 2)
    res = kmeans(x, 5)
    assert sorted(res.labels.tolist()) == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        kmeans(x, 6)
    dup = np.zeros((4, 2))
    assert len(set(kmeans(dup, 2).labels.tolist())) == 2


def test_kmeans_deterministic():
    x, _ = blobs(1)
    assert np.array_equal(kmeans(x, 3, seed=7).labels, kmeans(x, 3, seed=7).labels)


def test_pca_planar_data():
    rng = np.random.default_rng(0)
    plane = rng.normal(size=(30, 2)) * [5, 2]
    basis = np.linalg.qr(rng.normal(size=(6, 6)))[0][:2]
    x = plane @ basis + 1.5
    res = pca_2d(x)
    recon = res.points @ res.components + x.mean(0)
    assert np.allclose(recon, x)
    assert np.allclose(res.components @ res.components.T, np.eye(2))


def test_pca_matches_covariance_eigenvectors():
    x = np.random.default_rng(1).normal(size=(25, 5)) * [4, 3, 2, 1, 0.5]
    res = pca_2d(x)
    vals, vecs = np.linalg.eigh(np.cov(x, rowvar=False))
    top = vecs[:, ::-1][:, :2].T
    assert np.allclose(res.explained_variance, vals[::-1][:2])
    assert np.allclose(np.abs(res.components @ top.T), np.eye(2), atol=1e-8)


def test_pca_line_has_zero_second_component():
    t = np.linspace(0, 1, 10)
    x = np.outer(t, [1.0, 2.0, 3.0])
    res = pca_2d(x)
    assert res.explained_variance[1] == 0
    assert np.allclose(res.points[:, 1], 0)
    assert res.components[0].max() > 0
