"""Whole-graph embeddings (PV-DBOW over WL tokens), k-means and PCA."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

G2V_DIM = 128
G2V_EPOCHS = 50
G2V_LR = 0.025
G2V_NEGATIVES = 5


@dataclass
class Graph2VecModel:
    vectors: np.ndarray
    vocabulary: list[str]
    loss_history: list[float]  # mean loss per epoch
    params: dict = field(default_factory=dict)


def graph2vec_train(
    documents: Sequence[Sequence[str]],
    dim: int = G2V_DIM,
    epochs: int = G2V_EPOCHS,
    lr: float = G2V_LR,
    negatives: int = G2V_NEGATIVES,
    seed: int = 0,
) -> Graph2VecModel:
    """Train one vector per document to predict its own tokens (negative sampling).

    Noise tokens follow the unigram distribution raised to 0.75. The learning
    rate decays linearly from ``lr`` to ``lr / 100``. A fixed seed gives
    bit-identical vectors.
    """
    if len(documents) < 2:
        raise ValueError("graph2vec needs at least two documents")
    vocab = sorted({tok for doc in documents for tok in doc})
    if not vocab:
        raise ValueError("empty vocabulary")
    index = {tok: i for i, tok in enumerate(vocab)}
    pairs = np.array([(g, index[tok]) for g, doc in enumerate(documents) for tok in doc], dtype=np.int64)
    counts = np.bincount(pairs[:, 1], minlength=len(vocab)).astype(float)
    noise = counts ** 0.75
    noise /= noise.sum()

    rng = np.random.default_rng(seed)
    doc_vecs = (rng.random((len(documents), dim)) - 0.5) / dim
    out_vecs = np.zeros((len(vocab), dim))
    target_labels = np.zeros(negatives + 1)
    target_labels[0] = 1.0
    total = epochs * len(pairs)
    step = 0
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(pairs))
        noise_draws = rng.choice(len(vocab), size=(len(pairs), negatives), p=noise)
        epoch_loss = 0.0
        for t, p_idx in enumerate(order):
            alpha = lr - (lr - lr / 100) * step / total
            step += 1
            g, w = pairs[p_idx]
            targets = np.concatenate(([w], noise_draws[t]))
            vecs = out_vecs[targets]
            score = vecs @ doc_vecs[g]
            sig = 1.0 / (1.0 + np.exp(-score))
            epoch_loss -= np.log(sig[0] + 1e-12) + np.log(1.0 - sig[1:] + 1e-12).sum()
            grad = (target_labels - sig) * alpha
            doc_step = grad @ vecs
            np.add.at(out_vecs, targets, np.outer(grad, doc_vecs[g]))
            doc_vecs[g] += doc_step
        losses.append(epoch_loss / len(pairs))
    params = {"dim": dim, "epochs": epochs, "lr": lr, "negatives": negatives, "seed": seed}
    return Graph2VecModel(doc_vecs, vocab, losses, params)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: list[float]
    iterations: int


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1)


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [int(rng.integers(len(x)))]
    for _ in range(1, k):
        d2 = _sq_dists(x, x[centers]).min(axis=1)
        if d2.sum() == 0:
            remaining = [i for i in range(len(x)) if i not in centers]
            centers.append(int(rng.choice(remaining)))
        else:
            centers.append(int(rng.choice(len(x), p=d2 / d2.sum())))
    return x[centers].copy()


def kmeans(vectors, k: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """k-means++ seeding then Lloyd iterations until the assignment is stable."""
    x = np.asarray(vectors, dtype=np.float64)
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the number of points ({n})")
    rng = np.random.default_rng(seed)
    centroids = kmeans_plus_plus(x, k, rng)
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(x, centroids)
        new = d2.argmin(axis=1)
        # empty clusters take the point farthest from its own centroid
        for c in range(k):
            if not np.any(new == c):
                own = d2[np.arange(n), new]
                sizes = np.bincount(new, minlength=k)
                own[sizes[new] <= 1] = -1
                far = int(np.argmax(own))
                new[far] = c
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = np.array([x[labels == c].mean(axis=0) for c in range(k)])
        history.append(float(_sq_dists(x, centroids)[np.arange(n), labels].sum()))
    return KMeansResult(labels, centroids, history, it)


@dataclass
class PCAResult:
    points: np.ndarray
    components: np.ndarray  # (2, dim)
    explained_variance: np.ndarray


def pca_2d(vectors) -> PCAResult:
    x = np.asarray(vectors, dtype=np.float64)
    if len(x) < 2:
        raise ValueError("PCA needs at least two vectors")
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = np.zeros((2, x.shape[1]))
    var = np.zeros(2)
    m = min(2, len(s))
    comps[:m] = vt[:m]
    var[:m] = s[:m] ** 2 / (len(x) - 1)
    for i in range(2):
        if var[i] <= 1e-24 * max(var[0], 1e-300):
            comps[i] = 0.0
            var[i] = 0.0
            continue
        lead = np.argmax(np.abs(comps[i]))
        if comps[i, lead] < 0:
            comps[i] = -comps[i]
    return PCAResult(centered @ comps.T, comps, var)
