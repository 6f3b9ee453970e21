"""In-memory corpus processing: annotated matrices to labeled k-NN graphs.

The staged pipeline persists every step to disk; these functions are the
pure computations behind those stages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .dtw import DistanceMatrix, FeatureConfig, pairwise_matrix, pitch_stats, segment_features
from .graph import SegmentGraph, knn_graph, label_nodes
from .ir import CorpusStats, annotate, bin_expectancy, note_expectancies
from .mds import MDSResult, joint_segment_mds
from .score import NoteMatrix
from .segment import MIN_NOTES, W_ONSET, W_PITCH, Segment, segment_piece
from .wl import DEFAULT_H, wl_kernel


@dataclass
class AnnotatedCorpus:
    matrices: list[NoteMatrix]
    stats: CorpusStats
    expectancies: dict[str, list[float | None]]


def annotate_corpus(matrices: Sequence[NoteMatrix]) -> AnnotatedCorpus:
    annotated = [annotate(m) for m in matrices]
    stats = CorpusStats.from_matrices(annotated)
    exp = {m.piece_id: note_expectancies(m.pitches, stats) for m in annotated}
    return AnnotatedCorpus(annotated, stats, exp)


def segment_corpus(corpus: AnnotatedCorpus, w_pitch=W_PITCH, w_onset=W_ONSET,
                   min_notes=MIN_NOTES) -> dict[str, list[Segment]]:
    """Segment every piece, then bin segment expectancy over the whole corpus."""
    out = {}
    for m in corpus.matrices:
        out[m.piece_id] = segment_piece(m, w_pitch, w_onset, min_notes, corpus.expectancies[m.piece_id])
    flat = [s for segs in out.values() for s in segs]
    for seg, b in zip(flat, bin_expectancy([s.expectancy for s in flat])):
        seg.bin = b
    return out


def feature_config(matrices: Sequence[NoteMatrix], normalize: bool = True) -> FeatureConfig:
    mean, std = pitch_stats(matrices)
    return FeatureConfig(mean, std, normalize)


def piece_features(segments: Sequence[Segment], config: FeatureConfig) -> list[np.ndarray]:
    return [segment_features(s, config) for s in segments]


def piece_graph(dist: DistanceMatrix, segments: Sequence[Segment], k: int) -> SegmentGraph:
    piece_id = segments[0].piece_id
    g = knn_graph(dist, k, piece_id, expectancy=[s.expectancy for s in segments])
    return label_nodes(g, [s.bin for s in segments], [s.dominant for s in segments])


@dataclass
class CorpusGraphs:
    """Everything downstream stages need, computed in memory."""

    segments: dict[str, list[Segment]]
    config: FeatureConfig
    features: dict[str, list[np.ndarray]]
    distances: dict[str, DistanceMatrix]
    graphs: dict[int, list[SegmentGraph]] = field(default_factory=dict)
    composers: dict[str, str] = field(default_factory=dict)


def build_corpus(matrices: Sequence[NoteMatrix], ks: Sequence[int], normalize: bool = True,
                 w_pitch=W_PITCH, w_onset=W_ONSET, min_notes=MIN_NOTES) -> CorpusGraphs:
    corpus = annotate_corpus(matrices)
    segments = segment_corpus(corpus, w_pitch, w_onset, min_notes)
    config = feature_config(corpus.matrices, normalize)
    feats = {pid: piece_features(segs, config) for pid, segs in segments.items()}
    dists = {
        pid: pairwise_matrix(f, ids=[s.segment_id for s in segments[pid]], normalize=normalize)
        for pid, f in feats.items()
    }
    graphs = {
        k: [piece_graph(dists[pid], segments[pid], min(k, len(segments[pid]) - 1)) for pid in segments]
        for k in ks
    }
    return CorpusGraphs(segments, config, feats, dists, graphs,
                        {m.piece_id: m.composer for m in matrices})


# -- segment-level MDS for selected piece pairs ------------------------------

def joint_mds(features_a: Sequence[np.ndarray], features_b: Sequence[np.ndarray],
              normalize: bool = True, knn_k: int = 1) -> MDSResult:
    seqs = list(features_a) + list(features_b)
    labels = [0] * len(features_a) + [1] * len(features_b)
    dist = pairwise_matrix(seqs, normalize=normalize)
    return joint_segment_mds(dist, labels, knn_k)


def select_pairs(graphs: Sequence[SegmentGraph], h: int = DEFAULT_H,
                 per_tier: int = 4) -> list[tuple[str, str, float, str]]:
    """Piece pairs with the highest, median-nearest and lowest WL similarity.

    Returns (piece_a, piece_b, similarity, tier) without duplicates; ties are
    broken by pair order so the selection is deterministic.
    """
    scored = []
    for a, b in combinations(range(len(graphs)), 2):
        scored.append((wl_kernel(graphs[a], graphs[b], h), graphs[a].piece_id, graphs[b].piece_id))
    by_sim = sorted(scored, key=lambda t: (-t[0], t[1], t[2]))
    median = float(np.median([s for s, _, _ in scored]))
    by_median = sorted(scored, key=lambda t: (abs(t[0] - median), t[1], t[2]))
    by_low = sorted(scored, key=lambda t: (t[0], t[1], t[2]))
    chosen, seen = [], set()
    for tier, ranked in (("high", by_sim), ("median", by_median), ("low", by_low)):
        taken = 0
        for s, a, b in ranked:
            if taken == per_tier:
                break
            if (a, b) in seen:
                continue
            seen.add((a, b))
            chosen.append((a, b, s, tier))
            taken += 1
    return chosen
