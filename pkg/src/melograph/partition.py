"""Kernighan-Lin balanced bisection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GraphTooSmallError
from .graph import SegmentGraph


@dataclass
class Bisection:
    part_a: list[int]
    part_b: list[int]
    initial_cut: float
    cut_history: list[float]  # cut cost after the seed split and after each applied pass

    @property
    def cut(self) -> float:
        return self.cut_history[-1]


def cut_cost(weights: np.ndarray, side: np.ndarray) -> float:
    cross = side[:, None] != side[None, :]
    return float(weights[cross].sum() / 2)


def seeded_split(n: int, seed: int) -> np.ndarray:
    perm = np.random.default_rng(seed).permutation(n)
    side = np.zeros(n, dtype=np.int8)
    side[perm[n // 2:]] = 1
    return side


def _pass(weights: np.ndarray, side: np.ndarray):
    """One KL pass. Returns the best prefix of swaps and its total gain."""
    same = side[:, None] == side[None, :]
    d = np.where(same, -weights, weights).sum(axis=1)
    locked = np.zeros(len(side), dtype=bool)
    swaps, gains = [], []
    for _ in range(min(int((side == 0).sum()), int((side == 1).sum()))):
        a_idx = np.flatnonzero((side == 0) & ~locked)
        b_idx = np.flatnonzero((side == 1) & ~locked)
        g = d[a_idx][:, None] + d[b_idx][None, :] - 2 * weights[np.ix_(a_idx, b_idx)]
        flat = int(np.argmax(g))
        ia, ib = divmod(flat, len(b_idx))
        a, b = int(a_idx[ia]), int(b_idx[ib])
        swaps.append((a, b))
        gains.append(float(g[ia, ib]))
        locked[a] = locked[b] = True
        in_a = side == 0
        d = d + np.where(in_a, 2 * weights[:, a] - 2 * weights[:, b], 2 * weights[:, b] - 2 * weights[:, a])
    if not gains:
        return [], 0.0
    cum = np.cumsum(gains)
    best = int(np.argmax(cum))
    return swaps[:best + 1], float(cum[best])


def kl_partition(graph: SegmentGraph, seed: int = 0, max_passes: int = 50) -> Bisection:
    if graph.n < 4:
        raise GraphTooSmallError(f"graph {graph.piece_id!r} has {graph.n} nodes; bisection needs 4")
    weights = graph.weight_matrix()
    side = seeded_split(graph.n, seed)
    tol = 1e-12 * max(weights.sum(), 1.0)
    initial = cut_cost(weights, side)
    history = [initial]
    for _ in range(max_passes):
        swaps, gain = _pass(weights, side)
        if gain <= tol:
            break
        for a, b in swaps:
            side[a], side[b] = 1, 0
        history.append(cut_cost(weights, side))
    part_a = np.flatnonzero(side == 0).tolist()
    part_b = np.flatnonzero(side == 1).tolist()
    return Bisection(part_a, part_b, initial, history)


def kl_bisect(graph: SegmentGraph, seed: int = 0) -> tuple[SegmentGraph, SegmentGraph]:
    """Induced subgraphs of the two Kernighan-Lin halves."""
    part = kl_partition(graph, seed)
    return graph.subgraph(part.part_a), graph.subgraph(part.part_b)
