"""Implication-Realization symbols and two-factor melodic expectancy."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np

SYMBOLS = ("P", "D", "ID", "IP", "VP", "R", "IR", "VR", "X")
# tie-break order for the dominant symbol of a segment
PRECEDENCE = ("P", "D", "ID", "IP", "VP", "R", "IR", "VR")
BOUNDARY = "X"

SMALL_MAX = 5  # semitones; 6 (tritone) and up count as large
SIMILAR_MAX = 2
PP_CAP = 12

# squared semipartial correlations (proximity, reversal)
SR2_PROXIMITY = 0.364
SR2_REVERSAL = 0.144
# rounded weights used in the expectancy formula
BETA_PP = 0.604
BETA_PR = 0.379

BINS = ("VeryLow", "Low", "Medium", "High", "VeryHigh")
NEUTRAL_BIN = "Medium"


def signed_sqrt(value: float) -> float:
    return math.copysign(math.sqrt(abs(value)), value)


def classify_triplet(p1: int, p2: int, p3: int) -> str:
    """I-R symbol for the middle note of three consecutive pitches.

    Only interval sizes and whether the direction changes are consulted, so
    the result is invariant under transposition and inversion.
    """
    imp = p2 - p1
    real = p3 - p2
    a, b = abs(imp), abs(real)
    if a == 0 and b == 0:
        return "D"
    if a == 0:
        # unison followed by motion: a step continues, a skip duplicates
        if b <= SIMILAR_MAX:
            return "P"
        return "ID" if b <= SMALL_MAX else "VP"
    if b == 0:
        if a <= SIMILAR_MAX:
            return "P"
        return "ID" if a <= SMALL_MAX else "IR"

    same_dir = (imp > 0) == (real > 0)
    similar = abs(b - a) <= SIMILAR_MAX
    if a <= SMALL_MAX:
        if same_dir:
            if similar:
                return "P"
            return "VP" if b > a else "IR"
        if similar:
            return "IP"
        return "VR" if b > a else "R"
    # large implicative interval
    if b <= a - 3:
        return "IR" if same_dir else "R"
    return "VP" if same_dir else "VR"


def annotate(matrix):
    """Return a copy of ``matrix`` with every event's ``ir_symbol`` set."""
    pitches = matrix.pitches
    n = len(pitches)
    symbols = [BOUNDARY] * n
    for i in range(1, n - 1):
        symbols[i] = classify_triplet(pitches[i - 1], pitches[i], pitches[i + 1])
    return matrix.with_events(replace(ev, ir_symbol=s) for ev, s in zip(matrix.events, symbols))


# -- expectancy --------------------------------------------------------------

@dataclass(frozen=True)
class ExpectancyScore:
    pp_norm: float
    pr_norm: float
    e: float


def proximity_raw(p2: int, p3: int) -> int:
    return min(abs(p3 - p2), PP_CAP)


def reversal_raw(p1: int, p2: int, p3: int) -> int:
    imp = p2 - p1
    real = p3 - p2
    if abs(imp) <= SMALL_MAX:
        return 0
    score = 0
    if real != 0:
        score += 1 if (imp > 0) != (real > 0) else -1
    if abs(p3 - p1) <= 2:
        score += 1
    return score


@dataclass(frozen=True)
class CorpusStats:
    """Normalization bounds of the raw expectancy factors over a corpus."""

    pp_min: int
    pp_max: int
    pr_min: int
    pr_max: int
    n_triplets: int

    @classmethod
    def from_triplets(cls, triplets: Iterable[Sequence[int]]) -> "CorpusStats":
        pp, pr = [], []
        for p1, p2, p3 in triplets:
            pp.append(proximity_raw(p2, p3))
            pr.append(reversal_raw(p1, p2, p3))
        if not pp:
            return cls(0, 0, 0, 0, 0)
        return cls(min(pp), max(pp), min(pr), max(pr), len(pp))

    @classmethod
    def from_matrices(cls, matrices) -> "CorpusStats":
        return cls.from_triplets(t for m in matrices for t in triplets_of(m.pitches))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CorpusStats":
        return cls(**json.loads(text))


def triplets_of(pitches: Sequence[int]):
    return [tuple(pitches[i - 1:i + 2]) for i in range(1, len(pitches) - 1)]


def note_expectancy(p1: int, p2: int, p3: int, stats: CorpusStats) -> ExpectancyScore:
    pp_norm = 1.0 - proximity_raw(p2, p3) / PP_CAP
    span = stats.pr_max - stats.pr_min
    if span == 0:
        pr_norm = 0.5
    else:
        raw = min(max(reversal_raw(p1, p2, p3), stats.pr_min), stats.pr_max)
        pr_norm = (raw - stats.pr_min) / span
    return ExpectancyScore(pp_norm, pr_norm, combine(pp_norm, pr_norm))


def combine(pp_norm: float, pr_norm: float) -> float:
    return BETA_PP * pp_norm + BETA_PR * pr_norm


def note_expectancies(pitches: Sequence[int], stats: CorpusStats) -> list[float | None]:
    """Per-note E_i; boundary notes without a full triplet get ``None``."""
    out: list[float | None] = [None] * len(pitches)
    for i in range(1, len(pitches) - 1):
        out[i] = note_expectancy(pitches[i - 1], pitches[i], pitches[i + 1], stats).e
    return out


def segment_expectancy(values: Iterable[float | None]) -> float | None:
    """Mean of the defined note expectancies, or None if there are none."""
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr))
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def bin_expectancy(values: Sequence[float | None]) -> list[str]:
    """Quintile bins by percentile rank within ``values``.

    Percentile rank is (rank - 0.5) / n with average ranks for ties; ``None``
    entries (segments without expectancy) are placed in the neutral bin and
    do not take part in the ranking.
    """
    idx = [i for i, v in enumerate(values) if v is not None]
    out = [NEUTRAL_BIN] * len(values)
    if not idx:
        return out
    ranks = average_ranks([values[i] for i in idx])
    pct = (ranks - 0.5) / len(idx) * 100.0
    for i, p in zip(idx, pct):
        out[i] = BINS[min(int(p // 20), 4)]
    return out


def dominant_symbol(symbols: Iterable[str]) -> str:
    counts = Counter(s for s in symbols if s != BOUNDARY)
    if not counts:
        return BOUNDARY
    best = max(counts.values())
    return next(s for s in PRECEDENCE if counts.get(s) == best)
