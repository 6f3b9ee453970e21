"""Effect sizes, Mann-Whitney U and Benjamini-Hochberg adjustment."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ir import average_ranks


def cohens_d(x: Sequence[float], y: Sequence[float]) -> float:
    """(mean x - mean y) / pooled SD; a zero pooled SD gives +-inf (0 if the means agree)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = float(x.mean() - y.mean())
    dof = len(x) + len(y) - 2
    var_x = x.var(ddof=1) if len(x) > 1 else 0.0
    var_y = y.var(ddof=1) if len(y) > 1 else 0.0
    pooled = math.sqrt(((len(x) - 1) * var_x + (len(y) - 1) * var_y) / dof) if dof > 0 else 0.0
    if pooled == 0:
        return math.copysign(math.inf, diff) if diff != 0 else 0.0
    return diff / pooled


@dataclass(frozen=True)
class MannWhitney:
    u: float  # U statistic of the first sample
    auc: float
    p: float
    degenerate: bool  # zero variance under H0 (every value tied)


def mann_whitney(x: Sequence[float], y: Sequence[float]) -> MannWhitney:
    """Two-sided Mann-Whitney U, normal approximation with tie and continuity correction."""
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([np.asarray(x, float), np.asarray(y, float)])
    ranks = average_ranks(pooled)
    u1 = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    n = n1 + n2
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float((counts ** 3 - counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    mu = n1 * n2 / 2.0
    if var <= 0:
        return MannWhitney(u1, u1 / (n1 * n2), 1.0, True)
    u_big = max(u1, n1 * n2 - u1)
    z = (u_big - mu - 0.5) / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2)))
    return MannWhitney(u1, u1 / (n1 * n2), p, False)


def auc(x: Sequence[float], y: Sequence[float]) -> float:
    return mann_whitney(x, y).auc


def benjamini_hochberg(pvalues: Sequence[float]) -> list[float]:
    """Step-up BH adjusted p-values, in input order."""
    p = np.asarray(pvalues, dtype=float)
    m = len(p)
    if m == 0:
        return []
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out.tolist()
