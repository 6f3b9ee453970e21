"""Two-level temporal Gestalt segmentation (clangs, then segments)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .ir import BOUNDARY, dominant_symbol, segment_expectancy
from .score import NoteEvent, NoteMatrix

W_PITCH = 1.0
W_ONSET = 2.0
MIN_NOTES = 2


@dataclass
class Segment:
    piece_id: str
    ordinal: int
    start: int  # first note index, inclusive
    stop: int  # exclusive
    events: list[NoteEvent]
    expectancy: float | None = None
    dominant: str = BOUNDARY
    bin: str | None = None
    note_expectancy: list[float | None] = field(default_factory=list)

    @property
    def segment_id(self) -> tuple[str, int]:
        return (self.piece_id, self.ordinal)

    @property
    def label(self) -> str | None:
        if self.bin is None:
            return None
        return f"{self.bin}|{self.dominant}"

    def __len__(self) -> int:
        return self.stop - self.start

    def to_dict(self) -> dict:
        return {
            "segment_id": [self.piece_id, self.ordinal],
            "start": self.start,
            "stop": self.stop,
            "expectancy": self.expectancy,
            "dominant": self.dominant,
            "label": self.label,
        }


def _gap_distance(p_a, p_b, onset_a, onset_b, end_a, w_pitch, w_onset) -> float:
    ioi = onset_b - onset_a
    gap = max(onset_b - end_a, 0)
    return w_pitch * abs(p_b - p_a) + w_onset * float(ioi + gap)


def note_distances(matrix: NoteMatrix, w_pitch=W_PITCH, w_onset=W_ONSET) -> list[float]:
    ev = matrix.events
    return [
        _gap_distance(ev[i].midi_pitch, ev[i + 1].midi_pitch, ev[i].onset_global,
                      ev[i + 1].onset_global, ev[i].offset, w_pitch, w_onset)
        for i in range(len(ev) - 1)
    ]


def local_maxima(values: Sequence[float]) -> list[int]:
    """Indices of strict interior local maxima; a plateau reports its first index."""
    out = []
    n = len(values)
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        if j < n - 1 and values[i] > values[i - 1] and values[i] > values[j + 1]:
            out.append(i)
        i = j + 1
    return out


def clang_boundaries(matrix: NoteMatrix, w_pitch=W_PITCH, w_onset=W_ONSET) -> list[int]:
    """Note indices that start a new clang (never 0)."""
    if len(matrix) < 3:
        return []
    d = note_distances(matrix, w_pitch, w_onset)
    return [i + 1 for i in local_maxima(d)]


def _ranges(n: int, starts: Sequence[int]) -> list[tuple[int, int]]:
    cuts = [0, *starts, n]
    return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]


def clang_distances(matrix: NoteMatrix, clangs, w_pitch=W_PITCH, w_onset=W_ONSET) -> list[float]:
    ev = matrix.events
    out = []
    for (a0, a1), (b0, b1) in zip(clangs, clangs[1:]):
        mean_a = sum(e.midi_pitch for e in ev[a0:a1]) / (a1 - a0)
        mean_b = sum(e.midi_pitch for e in ev[b0:b1]) / (b1 - b0)
        end_a = max(e.offset for e in ev[a0:a1])
        out.append(_gap_distance(mean_a, mean_b, ev[a0].onset_global, ev[b0].onset_global,
                                 end_a, w_pitch, w_onset))
    return out


def segment_boundaries(
    matrix: NoteMatrix,
    clangs: Sequence[tuple[int, int]],
    w_pitch=W_PITCH,
    w_onset=W_ONSET,
    min_notes=MIN_NOTES,
) -> list[Segment]:
    """Group clangs into segments at local maxima of clang-to-clang distance."""
    if not clangs:
        raise ValueError("need at least one clang")
    dist = clang_distances(matrix, clangs, w_pitch, w_onset)
    cut_clangs = [i + 1 for i in local_maxima(dist)]
    # groups of clang indices; boundary strength between group g and g+1
    groups = [list(range(a, b)) for a, b in _ranges(len(clangs), cut_clangs)]
    strength = [dist[g[-1]] for g in groups[:-1]]

    def size(g):
        return sum(clangs[c][1] - clangs[c][0] for c in g)

    while len(groups) > 1:
        small = [i for i, g in enumerate(groups) if size(g) < min_notes]
        if not small:
            break
        i = small[0]
        if i == 0:
            into = 1
        elif i == len(groups) - 1:
            into = i - 1
        else:
            into = i - 1 if strength[i - 1] <= strength[i] else i + 1
        lo, hi = min(i, into), max(i, into)
        groups[lo:hi + 1] = [groups[lo] + groups[hi]]
        del strength[lo]

    segments = []
    for ordinal, g in enumerate(groups):
        start, stop = clangs[g[0]][0], clangs[g[-1]][1]
        segments.append(Segment(matrix.piece_id, ordinal, start, stop, matrix.events[start:stop]))
    return segments


def segment_piece(
    matrix: NoteMatrix,
    w_pitch=W_PITCH,
    w_onset=W_ONSET,
    min_notes=MIN_NOTES,
    note_expectancy: Sequence[float | None] | None = None,
) -> list[Segment]:
    """Clang detection followed by segment grouping, with per-segment I-R summaries."""
    clangs = _ranges(len(matrix), clang_boundaries(matrix, w_pitch, w_onset))
    segments = segment_boundaries(matrix, clangs, w_pitch, w_onset, min_notes)
    for seg in segments:
        seg.dominant = dominant_symbol(e.ir_symbol or BOUNDARY for e in seg.events)
        if note_expectancy is not None:
            seg.note_expectancy = list(note_expectancy[seg.start:seg.stop])
            seg.expectancy = segment_expectancy(seg.note_expectancy)
    return segments


def segments_to_json(segments: Sequence[Segment]) -> str:
    return json.dumps([s.to_dict() for s in segments], indent=2)
