"""Append-only chunk files for resumable pairwise computations.

Pairs (i, j), i < j, are enumerated row-major over the upper triangle. A
chunk holds a contiguous range of pair indices. Each chunk file is written
once via temp-and-rename; the manifest is rewritten atomically after every
chunk, so a killed run never exposes a half-written chunk.

Chunk layout (little endian)::

    magic   8s   b"MGCHUNK1"
    corpus  32s  sha256 of the input sequences
    config  32s  sha256 of the feature configuration
    start   Q
    stop    Q
    records (i: I, j: I, d: d) * (stop - start)
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointCorruptError, StaleCacheError

MAGIC = b"MGCHUNK1"
HEADER = struct.Struct("<8s32s32sQQ")
RECORD = struct.Struct("<IId")
MANIFEST = "manifest.json"


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_at(index: int, n: int) -> tuple[int, int]:
    """Inverse of the row-major upper-triangle enumeration."""
    i = 0
    row = n - 1
    while index >= row:
        index -= row
        i += 1
        row -= 1
    return i, i + 1 + index


def pairs_in_range(start: int, stop: int, n: int):
    i, j = pair_at(start, n)
    for _ in range(start, stop):
        yield i, j
        j += 1
        if j == n:
            i += 1
            j = i + 1


def chunk_ranges(n_pairs: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk_size, n_pairs)) for s in range(0, n_pairs, chunk_size)]


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class ChunkStore:
    """Directory of chunk files plus a manifest of completed pair ranges."""

    def __init__(self, root, corpus_hash: str, config_hash: str, n_items: int):
        self.root = Path(root)
        self.corpus_hash = corpus_hash
        self.config_hash = config_hash
        self.n_items = n_items
        self.n_pairs = pair_count(n_items)
        self.root.mkdir(parents=True, exist_ok=True)
        self._entries = self._load_manifest()

    # manifest -------------------------------------------------------------
    def _load_manifest(self) -> list[dict]:
        path = self.root / MANIFEST
        if not path.exists():
            return []
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise CheckpointCorruptError(MANIFEST, f"unreadable manifest ({err})") from None
        if (data.get("corpus_hash"), data.get("config_hash")) != (self.corpus_hash, self.config_hash):
            raise StaleCacheError(
                f"checkpoint in {self.root} was written for corpus {data.get('corpus_hash', '?')[:12]} "
                f"/ config {data.get('config_hash', '?')[:12]}, current run is "
                f"{self.corpus_hash[:12]} / {self.config_hash[:12]}; refusing to reuse it"
            )
        if data.get("n_pairs") != self.n_pairs:
            raise StaleCacheError(f"checkpoint covers {data.get('n_pairs')} pairs, expected {self.n_pairs}")
        entries = sorted(data.get("chunks", []), key=lambda e: e["start"])
        for prev, cur in zip(entries, entries[1:]):
            if cur["start"] < prev["stop"]:
                raise CheckpointCorruptError(
                    MANIFEST, f"overlapping ranges [{prev['start']},{prev['stop']}) "
                    f"and [{cur['start']},{cur['stop']})"
                )
        for e in entries:
            if not 0 <= e["start"] < e["stop"] <= self.n_pairs:
                raise CheckpointCorruptError(MANIFEST, f"range {e['start']}..{e['stop']} out of bounds")
        return entries

    def _write_manifest(self) -> None:
        data = {
            "version": 1,
            "corpus_hash": self.corpus_hash,
            "config_hash": self.config_hash,
            "n_pairs": self.n_pairs,
            "chunks": sorted(self._entries, key=lambda e: e["start"]),
        }
        _atomic_write(self.root / MANIFEST, json.dumps(data, indent=1).encode())

    def completed(self) -> list[tuple[int, int]]:
        return [(e["start"], e["stop"]) for e in self._entries]

    def covers_all(self) -> bool:
        pos = 0
        for start, stop in self.completed():
            if start != pos:
                return False
            pos = stop
        return pos == self.n_pairs

    # chunks ---------------------------------------------------------------
    @staticmethod
    def chunk_name(start: int, stop: int) -> str:
        return f"chunk_{start:09d}_{stop:09d}.bin"

    def write_chunk(self, start: int, values) -> Path:
        values = np.asarray(values, dtype=np.float64)
        stop = start + len(values)
        new = {"start": start, "stop": stop}
        for e in self._entries:
            if start < e["stop"] and e["start"] < stop:
                raise CheckpointCorruptError(
                    self.chunk_name(start, stop), f"overlaps completed range [{e['start']},{e['stop']})"
                )
        body = bytearray(HEADER.pack(MAGIC, bytes.fromhex(self.corpus_hash),
                                     bytes.fromhex(self.config_hash), start, stop))
        for (i, j), d in zip(pairs_in_range(start, stop, self.n_items), values.tolist()):
            body += RECORD.pack(i, j, d)
        name = self.chunk_name(start, stop)
        _atomic_write(self.root / name, bytes(body))
        new.update(file=name, sha256=hashlib.sha256(body).hexdigest())
        self._entries.append(new)
        self._write_manifest()
        return self.root / name

    def read_chunk(self, entry: dict) -> np.ndarray:
        """Validate one manifest entry and return its distances."""
        name = entry["file"]
        path = self.root / name
        if not path.exists():
            raise CheckpointCorruptError(name, "file missing")
        raw = path.read_bytes()
        if hashlib.sha256(raw).hexdigest() != entry.get("sha256"):
            raise CheckpointCorruptError(name, "checksum mismatch")
        if len(raw) < HEADER.size:
            raise CheckpointCorruptError(name, "truncated header")
        magic, corpus, config, start, stop = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise CheckpointCorruptError(name, "bad magic")
        if corpus.hex() != self.corpus_hash or config.hex() != self.config_hash:
            raise StaleCacheError(f"chunk {name} was computed under a different corpus/config")
        if (start, stop) != (entry["start"], entry["stop"]):
            raise CheckpointCorruptError(name, "header range disagrees with manifest")
        expected = HEADER.size + RECORD.size * (stop - start)
        if len(raw) != expected:
            raise CheckpointCorruptError(name, f"size {len(raw)} != {expected}")
        out = np.empty(stop - start)
        for k, (i, j) in enumerate(pairs_in_range(start, stop, self.n_items)):
            ri, rj, d = RECORD.unpack_from(raw, HEADER.size + k * RECORD.size)
            if (ri, rj) != (i, j):
                raise CheckpointCorruptError(name, f"record {k} is pair ({ri},{rj}), expected ({i},{j})")
            out[k] = d
        return out

    def load_all(self) -> tuple[dict[int, np.ndarray], list[str]]:
        """Readable chunks keyed by start, plus names of chunks that failed validation.

        Failed chunks are dropped from the manifest so they can be recomputed.
        """
        good, bad = {}, []
        for entry in list(self._entries):
            try:
                good[entry["start"]] = self.read_chunk(entry)
            except CheckpointCorruptError:
                bad.append(entry["file"])
                self._entries.remove(entry)
        if bad:
            self._write_manifest()
        return good, bad
