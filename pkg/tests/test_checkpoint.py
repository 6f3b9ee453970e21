import json

import numpy as np
import pytest

from melograph.checkpoint import ChunkStore, chunk_ranges, pair_at, pair_count, pairs_in_range
from melograph.errors import CheckpointCorruptError, StaleCacheError

CORPUS = "aa" * 32
CONFIG = "bb" * 32


def test_hundred_pairs_in_seven_chunks():
    ranges = chunk_ranges(100, 15)
    assert len(ranges) == 7
    covered = [p for s, e in ranges for p in range(s, e)]
    assert covered == list(range(100))


def test_pair_enumeration_is_row_major():
    n = 6
    expected = [(i, j) for i in range(n) for j in range(i + 1, n)]
    assert [pair_at(k, n) for k in range(pair_count(n))] == expected
    assert list(pairs_in_range(3, 11, n)) == expected[3:11]


def test_store_covers_all_pairs(tmp_path):
    n = 15  # 105 pairs
    store = ChunkStore(tmp_path, CORPUS, CONFIG, n)
    for s, e in chunk_ranges(store.n_pairs, 15):
        store.write_chunk(s, np.arange(s, e, dtype=float))
    assert len(store.completed()) == 7
    assert store.covers_all()
    again = ChunkStore(tmp_path, CORPUS, CONFIG, n)
    good, bad = again.load_all()
    assert bad == []
    values = np.concatenate([good[s] for s, _ in again.completed()])
    assert values.tolist() == list(range(105))


def test_partial_store_does_not_cover(tmp_path):
    store = ChunkStore(tmp_path, CORPUS, CONFIG, 6)
    store.write_chunk(0, [1.0] * 5)
    store.write_chunk(10, [1.0] * 5)
    assert not store.covers_all()


def test_overlapping_write_rejected(tmp_path):
    store = ChunkStore(tmp_path, CORPUS, CONFIG, 6)
    store.write_chunk(0, [1.0] * 5)
    with pytest.raises(CheckpointCorruptError):
        store.write_chunk(3, [1.0] * 4)


def test_overlapping_manifest_rejected(tmp_path):
    store = ChunkStore(tmp_path, CORPUS, CONFIG, 6)
    store.write_chunk(0, [1.0] * 5)
    store.write_chunk(5, [1.0] * 5)
    path = tmp_path / "manifest.json"
    data = json.loads(path.read_text())
    data["chunks"][1]["start"] = 4
    path.write_text(json.dumps(data))
    with pytest.raises(CheckpointCorruptError, match="overlapping"):
        ChunkStore(tmp_path, CORPUS, CONFIG, 6)


def test_stale_hash_refused(tmp_path):
    ChunkStore(tmp_path, CORPUS, CONFIG, 6).write_chunk(0, [1.0] * 5)
    with pytest.raises(StaleCacheError):
        ChunkStore(tmp_path, CORPUS, "cc" * 32, 6)
    with pytest.raises(StaleCacheError):
        ChunkStore(tmp_path, "dd" * 32, CONFIG, 6)


def test_corrupt_chunk_is_dropped_for_recompute(tmp_path):
    store = ChunkStore(tmp_path, CORPUS, CONFIG, 6)
    p0 = store.write_chunk(0, [1.0] * 5)
    store.write_chunk(5, [2.0] * 5)
    raw = bytearray(p0.read_bytes())
    raw[-1] ^= 0xFF
    p0.write_bytes(bytes(raw))
    again = ChunkStore(tmp_path, CORPUS, CONFIG, 6)
    good, bad = again.load_all()
    assert bad == [p0.name]
    assert list(good) == [5]
    assert again.completed() == [(5, 10)]


def test_missing_chunk_file(tmp_path):
    store = ChunkStore(tmp_path, CORPUS, CONFIG, 6)
    p0 = store.write_chunk(0, [1.0] * 5)
    p0.unlink()
    with pytest.raises(CheckpointCorruptError, match="missing"):
        store.read_chunk({"file": p0.name, "start": 0, "stop": 5, "sha256": ""})


def test_values_round_trip_exactly(tmp_path):
    store = ChunkStore(tmp_path, CORPUS, CONFIG, 5)
    values = np.random.default_rng(0).random(10)
    store.write_chunk(0, values)
    good, _ = ChunkStore(tmp_path, CORPUS, CONFIG, 5).load_all()
    assert np.array_equal(good[0], values)
