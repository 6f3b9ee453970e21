"""Weisfeiler-Lehman subtree features, kernel, and graph documents."""
from __future__ import annotations

import hashlib
import json
import math
from collections import Counter

from .errors import LabelingError
from .graph import SegmentGraph

DEFAULT_H = 3
MAX_H = 10


def _compress(own: str, neighbours: list[str]) -> str:
    blob = json.dumps([own, neighbours], separators=(",", ":")).encode()
    return "wl:" + hashlib.blake2b(blob, digest_size=8).hexdigest()


def wl_iterations(graph: SegmentGraph, h: int = DEFAULT_H) -> list[list[str]]:
    """Node labels at iterations 0..h. Iteration 0 holds the raw labels."""
    if not 0 <= h <= MAX_H:
        raise ValueError(f"WL iterations must be in [0, {MAX_H}], got {h}")
    for i, label in enumerate(graph.labels):
        if label is None:
            raise LabelingError(f"node {graph.piece_id}:{graph.node_ids[i]} has no label")
    current = list(graph.labels)
    out = [current]
    adj = graph.adjacency()
    for _ in range(h):
        current = [_compress(current[v], sorted(current[u] for u in adj[v])) for v in range(graph.n)]
        out.append(current)
    return out


def wl_document(graph: SegmentGraph, h: int = DEFAULT_H) -> list[str]:
    """Every WL label of every node at every iteration (a multiset, as a list)."""
    return [tok for level in wl_iterations(graph, h) for tok in level]


def wl_features(graph: SegmentGraph, h: int = DEFAULT_H) -> Counter:
    return Counter(wl_document(graph, h))


def dot(f1: Counter, f2: Counter) -> float:
    if len(f1) > len(f2):
        f1, f2 = f2, f1
    return float(sum(c * f2[t] for t, c in f1.items() if t in f2))


def normalized_kernel(f1: Counter, f2: Counter) -> float:
    denom = math.sqrt(dot(f1, f1) * dot(f2, f2))
    if denom == 0:
        return 0.0
    return min(dot(f1, f2) / denom, 1.0)


def wl_kernel(g1: SegmentGraph, g2: SegmentGraph, h: int = DEFAULT_H) -> float:
    """Cosine-normalized WL subtree kernel; edge weights are ignored."""
    return normalized_kernel(wl_features(g1, h), wl_features(g2, h))
