"""Intra- vs inter-graph similarity across k, and corpus similarity heatmaps."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .graph import SegmentGraph
from .partition import kl_bisect
from .stats import benjamini_hochberg, cohens_d, mann_whitney
from .wl import DEFAULT_H, normalized_kernel, wl_features, wl_kernel


def intra_similarity(graph: SegmentGraph, h: int = DEFAULT_H, seed: int = 0) -> float:
    """WL similarity between the two Kernighan-Lin halves of ``graph``."""
    a, b = kl_bisect(graph, seed)
    return wl_kernel(a, b, h)


@dataclass
class KLevel:
    k: int
    intra: dict[str, float]
    inter: list[tuple[str, str, float]]
    cohens_d: float
    auc: float
    p_raw: float
    degenerate: bool
    p_fdr: float | None = None

    @property
    def mean_intra(self) -> float:
        return float(np.mean(list(self.intra.values())))

    @property
    def mean_inter(self) -> float:
        return float(np.mean([s for _, _, s in self.inter]))


def _num(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class SimilarityReport:
    h: int
    levels: list[KLevel] = field(default_factory=list)

    def level(self, k: int) -> KLevel:
        return next(lv for lv in self.levels if lv.k == k)

    def to_json(self) -> str:
        data = {
            "h": self.h,
            "levels": [
                {
                    "k": lv.k,
                    "intra_scores": lv.intra,
                    "inter_scores": [{"a": a, "b": b, "score": s} for a, b, s in lv.inter],
                    "mean_intra": lv.mean_intra,
                    "mean_inter": lv.mean_inter,
                    "cohens_d": _num(lv.cohens_d),
                    "auc": lv.auc,
                    "p_raw": lv.p_raw,
                    "p_fdr": lv.p_fdr,
                    "degenerate": lv.degenerate,
                }
                for lv in self.levels
            ],
        }
        return json.dumps(data, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "mean_intra", "mean_inter", "d", "auc", "p_fdr"])
        for lv in self.levels:
            p_fdr = "" if lv.p_fdr is None else repr(lv.p_fdr)
            w.writerow([lv.k, repr(lv.mean_intra), repr(lv.mean_inter),
                        str(_num(lv.cohens_d)), repr(lv.auc), p_fdr])
        return buf.getvalue()


def compare_level(k: int, graphs: Sequence[SegmentGraph], h: int, seed: int = 0) -> KLevel:
    feats = [wl_features(g, h) for g in graphs]
    intra = {g.piece_id: intra_similarity(g, h, seed) for g in graphs}
    inter = [
        (graphs[i].piece_id, graphs[j].piece_id, normalized_kernel(feats[i], feats[j]))
        for i, j in combinations(range(len(graphs)), 2)
    ]
    x = list(intra.values())
    y = [s for _, _, s in inter]
    mw = mann_whitney(x, y)
    d = cohens_d(x, y)
    return KLevel(k, intra, inter, d, mw.auc, mw.p, mw.degenerate or math.isinf(d))


def k_sweep(graphs_by_k: Mapping[int, Sequence[SegmentGraph]], h: int = DEFAULT_H,
            seed: int = 0) -> SimilarityReport:
    """Per-k intra/inter statistics with BH adjustment across the non-degenerate levels."""
    levels = []
    for k in sorted(graphs_by_k):
        graphs = graphs_by_k[k]
        if len(graphs) < 3:
            raise ValueError("k_sweep needs at least three pieces")
        levels.append(compare_level(k, graphs, h, seed))
    tested = [lv for lv in levels if not lv.degenerate]
    for lv, adj in zip(tested, benjamini_hochberg([lv.p_raw for lv in tested])):
        lv.p_fdr = adj
    return SimilarityReport(h, levels)


@dataclass
class Heatmaps:
    pieces: list[str]
    piecewise: np.ndarray
    groups: list[str]
    grouped: np.ndarray  # NaN where a within-group mean is undefined

    def piecewise_csv(self) -> str:
        return _matrix_csv(self.pieces, self.piecewise)

    def grouped_csv(self) -> str:
        return _matrix_csv(self.groups, self.grouped)


def _matrix_csv(names, m) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", *names])
    for name, row in zip(names, m.tolist()):
        w.writerow([name, *("" if math.isnan(v) else repr(v) for v in row)])
    return buf.getvalue()


def corpus_heatmaps(graphs: Sequence[SegmentGraph], group_of: Mapping[str, str],
                    h: int = DEFAULT_H) -> Heatmaps:
    pieces = [g.piece_id for g in graphs]
    missing = [p for p in pieces if p not in group_of]
    if missing:
        raise ValueError(f"pieces without a group: {missing}")
    feats = [wl_features(g, h) for g in graphs]
    n = len(graphs)
    sim = np.eye(n)
    for i, j in combinations(range(n), 2):
        sim[i, j] = sim[j, i] = normalized_kernel(feats[i], feats[j])

    groups = list(dict.fromkeys(group_of[p] for p in pieces))
    members = {gname: [i for i, p in enumerate(pieces) if group_of[p] == gname] for gname in groups}
    grouped = np.full((len(groups), len(groups)), np.nan)
    for a, ga in enumerate(groups):
        for b, gb in enumerate(groups):
            if a == b:
                vals = [sim[i, j] for i, j in combinations(members[ga], 2)]
            else:
                vals = [sim[i, j] for i in members[ga] for j in members[gb]]
            if vals:
                grouped[a, b] = float(np.mean(vals))
    return Heatmaps(pieces, sim, groups, grouped)
