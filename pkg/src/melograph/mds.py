"""Metric MDS by SMACOF majorization, plus 2-D separation diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError


def classical_mds(delta: np.ndarray, dim: int = 2) -> np.ndarray:
    """Torgerson scaling: double-centered squared distances, top eigenvectors."""
    n = len(delta)
    j = np.eye(n) - 1.0 / n
    b = -0.5 * j @ (delta ** 2) @ j
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:dim]
    out = vecs[:, order] * np.sqrt(np.clip(vals[order], 0, None))
    if out.shape[1] < dim:
        out = np.hstack([out, np.zeros((n, dim - out.shape[1]))])
    return out


def _pairwise(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def normalized_stress(x: np.ndarray, delta: np.ndarray) -> float:
    iu = np.triu_indices(len(delta), k=1)
    d = _pairwise(x)[iu]
    target = delta[iu]
    return float(((d - target) ** 2).sum() / (target ** 2).sum())


def smacof(delta, init=None, max_iter: int = 300, tol: float = 1e-6, seed: int = 0):
    """Return (points, stress history). History[0] is the stress of the start."""
    delta = np.asarray(delta, dtype=np.float64)
    n = len(delta)
    if delta.shape != (n, n) or not np.allclose(delta, delta.T):
        raise ValueError("distance matrix must be square and symmetric")
    if not np.any(delta > 0):
        raise DegenerateInputError("all distances are zero; nothing to embed")
    x = classical_mds(delta) if init is None else np.asarray(init, dtype=np.float64).copy()
    if np.allclose(x, x[0]):
        x = np.random.default_rng(seed).normal(scale=delta.max(), size=(n, x.shape[1]))
    history = [normalized_stress(x, delta)]
    for _ in range(max_iter):
        d = _pairwise(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d > 0, delta / d, 0.0)
        b = -ratio
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        x = b @ x / n
        history.append(normalized_stress(x, delta))
        if history[-2] - history[-1] < tol:
            break
    return x, history


def silhouette_mean(points: np.ndarray, labels: Sequence) -> float:
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least two labels")
    d = _pairwise(np.asarray(points, dtype=float))
    scores = np.zeros(len(labels))
    for i in range(len(labels)):
        own = labels == labels[i]
        own[i] = False
        if not own.any():
            continue
        a = d[i, own].mean()
        b = min(d[i, labels == other].mean() for other in uniq if other != labels[i])
        scores[i] = 0.0 if max(a, b) == 0 else (b - a) / max(a, b)
    return float(scores.mean())


def knn_accuracy(points: np.ndarray, labels: Sequence, k: int = 1) -> float:
    """Leave-one-out k-NN accuracy; vote ties go to the nearest tied label."""
    labels = np.asarray(labels)
    d = _pairwise(np.asarray(points, dtype=float))
    np.fill_diagonal(d, np.inf)
    hits = 0
    for i in range(len(labels)):
        nearest = np.argsort(d[i], kind="stable")[:k]
        votes: dict = {}
        for rank, j in enumerate(nearest):
            count, first = votes.get(labels[j], (0, rank))
            votes[labels[j]] = (count + 1, first)
        winner = max(votes, key=lambda lab: (votes[lab][0], -votes[lab][1]))
        hits += winner == labels[i]
    return hits / len(labels)


@dataclass
class MDSResult:
    points: np.ndarray
    labels: list
    stress: float
    silhouette_mean: float
    knn_accuracy: float
    stress_history: list[float] = field(default_factory=list)


def joint_segment_mds(delta, labels: Sequence, knn_k: int = 1, max_iter: int = 300,
                      tol: float = 1e-6) -> MDSResult:
    """Embed a joint segment distance matrix in 2-D and score piece separation there."""
    delta = np.asarray(getattr(delta, "d", delta), dtype=np.float64)
    if len(delta) < 3:
        raise ValueError("joint MDS needs at least three segments")
    points, history = smacof(delta, max_iter=max_iter, tol=tol)
    return MDSResult(
        points,
        list(labels),
        history[-1],
        silhouette_mean(points, labels),
        knn_accuracy(points, labels, knn_k),
        history,
    )
