"""Multivariate dynamic time warping and pairwise distance matrices."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .checkpoint import ChunkStore, chunk_ranges, pair_count, pairs_in_range

log = logging.getLogger(__name__)

WORKERS_ENV = "MELOGRAPH_WORKERS"
NEUTRAL_EXPECTANCY = 0.5


def _as_2d(seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def dtw(a, b, normalize: bool = True) -> float:
    """DTW with steps (1,0), (0,1), (1,1) and Euclidean local cost.

    With ``normalize`` the cost of the optimal path is divided by its number
    of cells; among equal-cost paths the shortest is taken.
    """
    a = _as_2d(a)
    b = _as_2d(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw needs two non-empty sequences")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)).tolist()
    n, m = len(a), len(b)
    inf = math.inf
    acc_prev = [0.0] + [inf] * m
    len_prev = [0] * (m + 1)
    for i in range(n):
        row = cost[i]
        acc_cur = [inf] * (m + 1)
        len_cur = [0] * (m + 1)
        for j in range(1, m + 1):
            best, steps = acc_prev[j - 1], len_prev[j - 1]
            up, up_len = acc_prev[j], len_prev[j]
            if up < best or (up == best and up_len < steps):
                best, steps = up, up_len
            left, left_len = acc_cur[j - 1], len_cur[j - 1]
            if left < best or (left == best and left_len < steps):
                best, steps = left, left_len
            acc_cur[j] = best + row[j - 1]
            len_cur[j] = steps + 1
        acc_prev, len_prev = acc_cur, len_cur
        acc_prev[0] = inf
    total = acc_prev[m]
    return total / len_prev[m] if normalize else total


# -- features ----------------------------------------------------------------

@dataclass(frozen=True)
class FeatureConfig:
    """Which channels feed DTW and how they are scaled. Hashed into checkpoints."""

    pitch_mean: float
    pitch_std: float
    normalize: bool = True
    channels: tuple[str, ...] = ("pitch_z", "log2_duration", "expectancy")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def pitch_stats(matrices) -> tuple[float, float]:
    pitches = np.array([e.midi_pitch for m in matrices for e in m.events], dtype=float)
    std = float(pitches.std())
    return float(pitches.mean()), std if std > 0 else 1.0


def segment_features(segment, config: FeatureConfig) -> np.ndarray:
    """(notes x 3) array: z-scored pitch, log2 duration, note expectancy."""
    fill = segment.expectancy if segment.expectancy is not None else NEUTRAL_EXPECTANCY
    exp = segment.note_expectancy or [None] * len(segment.events)
    rows = []
    for ev, e in zip(segment.events, exp):
        rows.append((
            (ev.midi_pitch - config.pitch_mean) / config.pitch_std,
            math.log2(ev.duration),
            fill if e is None else e,
        ))
    return np.array(rows, dtype=np.float64)


def sequences_digest(sequences: Sequence[np.ndarray]) -> str:
    h = hashlib.sha256()
    for s in sequences:
        arr = np.ascontiguousarray(_as_2d(s))
        h.update(np.array(arr.shape, dtype=np.int64).tobytes())
        h.update(arr.tobytes())
    return h.hexdigest()


# -- pairwise ----------------------------------------------------------------

@dataclass
class DistanceMatrix:
    ids: list
    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.float64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = [_id_str(i) for i in self.ids]
        w.writerow(["id", *names])
        for name, row in zip(names, self.d.tolist()):
            w.writerow([name, *(repr(v) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        ids = rows[0][1:]
        d = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(ids, d)


def _id_str(i) -> str:
    if isinstance(i, tuple):
        return ":".join(str(x) for x in i)
    return str(i)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _compute_chunk(args) -> tuple[int, list[float]]:
    sequences, start, stop, normalize = args
    n = len(sequences)
    return start, [dtw(sequences[i], sequences[j], normalize) for i, j in pairs_in_range(start, stop, n)]


def pairwise_matrix(
    sequences: Sequence[np.ndarray],
    ids: Sequence | None = None,
    normalize: bool = True,
    store_dir=None,
    config_hash: str | None = None,
    chunk_size: int = 256,
    workers: int | None = None,
    on_chunk: Callable[[int, int], None] | None = None,
) -> DistanceMatrix:
    """All-pairs DTW, optionally checkpointed to ``store_dir``.

    ``on_chunk(start, stop)`` fires after each freshly computed chunk has
    been persisted; chunks restored from disk do not trigger it.
    """
    n = len(sequences)
    if n < 2:
        raise ValueError("pairwise_matrix needs at least two sequences")
    ids = list(ids) if ids is not None else list(range(n))
    sequences = [_as_2d(s) for s in sequences]
    n_pairs = pair_count(n)
    values = np.empty(n_pairs)
    todo = chunk_ranges(n_pairs, chunk_size)

    store = None
    if store_dir is not None:
        config_hash = config_hash or hashlib.sha256(f"normalize={normalize}".encode()).hexdigest()
        store = ChunkStore(store_dir, sequences_digest(sequences), config_hash, n)
        restored, bad = store.load_all()
        for name in bad:
            log.warning("recomputing corrupt checkpoint chunk %s", name)
        for entry in store.completed():
            values[entry[0]:entry[1]] = restored[entry[0]]
        # ranges written under another chunk size still count
        todo = _subtract(todo, store.completed())

    def finish(start, result):
        values[start:start + len(result)] = result
        if store is not None:
            store.write_chunk(start, result)
        if on_chunk is not None:
            on_chunk(start, start + len(result))

    workers = workers or default_workers()
    jobs = [(sequences, s, e, normalize) for s, e in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start, result in pool.map(_compute_chunk, jobs):
                finish(start, result)
    else:
        for job in jobs:
            finish(*_compute_chunk(job))

    d = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    d[iu] = values
    d = d + d.T
    return DistanceMatrix(ids, d)


def _subtract(ranges, done):
    out = []
    for s, e in ranges:
        pieces = [(s, e)]
        for ds, de in done:
            nxt = []
            for ps, pe in pieces:
                if de <= ps or ds >= pe:
                    nxt.append((ps, pe))
                    continue
                if ps < ds:
                    nxt.append((ps, ds))
                if de < pe:
                    nxt.append((de, pe))
            pieces = nxt
        out.extend(pieces)
    return out


def write_matrix(matrix: DistanceMatrix, path) -> None:
    Path(path).write_text(matrix.to_csv())
