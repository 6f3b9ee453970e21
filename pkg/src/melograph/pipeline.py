"""Staged, hash-chained pipeline over a corpus manifest.

Every stage writes into its own directory under the run directory. A stage's
key hashes its settings together with the output hashes of the stages it
reads, so a rerun with unchanged inputs is a no-op and a change propagates
only downstream. Directories are published by rename, so an interrupted
stage never leaves a partial artifact in place.
"""
from __future__ import annotations

import csv
import fcntl
import hashlib
import io
import json
import logging
import shutil
import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from .analysis import corpus_heatmaps, k_sweep
from .config import PipelineConfig
from .corpus import AnnotatedCorpus, annotate_corpus, joint_mds, piece_graph, segment_corpus, select_pairs
from .dtw import (DistanceMatrix, FeatureConfig, pairwise_matrix, pitch_stats, segment_features,
                  sequences_digest)
from .embed import graph2vec_train, kmeans, pca_2d
from .errors import DegenerateInputError, MelographError, StageDependencyError, StaleStageError
from .graph import SegmentGraph, from_json, to_dot, to_graphml, to_json
from .ir import CorpusStats
from .score import NoteMatrix, parse_musicxml_file, read_csv, write_csv
from .segment import Segment
from .wl import wl_document

log = logging.getLogger(__name__)

STAGES = ("ingest", "annotate", "segment", "dtw", "graph", "sweep", "heatmap", "mds", "embed", "cluster")

DEPENDS = {
    "ingest": (),
    "annotate": ("ingest",),
    "segment": ("annotate",),
    "dtw": ("segment",),
    "graph": ("segment", "dtw"),
    "sweep": ("graph",),
    "heatmap": ("graph",),
    "mds": ("segment", "dtw", "graph"),
    "embed": ("graph",),
    "cluster": ("embed",),
}

SETTINGS = {
    "ingest": ("melody",),
    "annotate": (),
    "segment": ("w_pitch", "w_onset", "min_notes"),
    "dtw": ("normalize_dtw",),
    "graph": ("k_min", "k_max"),
    "sweep": ("h", "seed"),
    "heatmap": ("h", "k"),
    "mds": ("h", "k", "mds_pairs_per_tier", "knn_k", "normalize_dtw"),
    "embed": ("h", "k", "graph2vec", "seed"),
    "cluster": ("clusters", "seed"),
}

META = "_meta.json"
CHUNK_LOG = "computed.log"


class PipelineError(MelographError):
    pass


# -- small IO helpers --------------------------------------------------------

def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _file_hashes(root: Path) -> dict[str, str]:
    return {
        p.relative_to(root).as_posix(): _sha(p.read_bytes())
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != META
    }


def _output_hash(files: dict[str, str]) -> str:
    return _sha(_dump(files).encode())


# -- manifest ----------------------------------------------------------------

@dataclass
class ManifestEntry:
    path: Path
    piece_id: str
    composer: str
    melody: str | None = None
    part: str | None = None


def load_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    data = yaml.safe_load(path.read_text()) or {}
    entries = []
    for i, item in enumerate(data.get("pieces") or []):
        if "path" not in item:
            raise PipelineError(f"{path}: entry {i} has no path")
        p = Path(item["path"])
        p = p if p.is_absolute() else path.parent / p
        entries.append(ManifestEntry(p, str(item.get("piece_id") or p.stem),
                                     str(item.get("composer") or ""),
                                     item.get("melody"), item.get("part")))
    if not entries:
        raise PipelineError(f"{path}: manifest lists no pieces")
    ids = [e.piece_id for e in entries]
    dupes = sorted({x for x in ids if ids.count(x) > 1})
    if dupes:
        raise PipelineError(f"{path}: duplicate piece ids {dupes}")
    return entries


def sources_hash(manifest_path) -> str:
    """Hash of the manifest and every score it lists."""
    h = hashlib.sha256(Path(manifest_path).read_bytes())
    for e in load_manifest(manifest_path):
        h.update(e.piece_id.encode())
        h.update(_sha(e.path.read_bytes()).encode())
    return h.hexdigest()


# -- run directory -----------------------------------------------------------

class RunDir:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.root = Path(config.output)

    def stage(self, name: str) -> Path:
        return self.root / name

    def meta(self, name: str) -> dict | None:
        path = self.stage(name) / META
        if not path.exists():
            return None
        return json.loads(path.read_text())

    @property
    def dtw_cache(self) -> Path:
        return self.root / ".cache" / "dtw"

    @contextmanager
    def lock(self):
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.root / ".lock", "w") as fh:
            try:
                fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError:
                raise PipelineError(f"another pipeline run holds the lock on {self.root}") from None
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def publish(self, name: str, build: Callable[[Path], None], meta: dict) -> None:
        """Build a stage into a hidden temp directory, then swap it into place."""
        tmp = self.root / f".tmp-{name}"
        old = self.root / f".old-{name}"
        for leftover in (tmp, old):
            if leftover.exists():
                shutil.rmtree(leftover)
        tmp.mkdir(parents=True)
        start = time.perf_counter()
        build(tmp)
        files = _file_hashes(tmp)
        meta = dict(meta, files=files, output_hash=_output_hash(files),
                    created=datetime.now(timezone.utc).isoformat(),
                    duration_s=round(time.perf_counter() - start, 6))
        (tmp / META).write_text(_dump(meta))
        final = self.stage(name)
        if final.exists():
            final.rename(old)
        tmp.rename(final)
        if old.exists():
            shutil.rmtree(old)


def stage_key(run: RunDir, name: str) -> tuple[str, dict[str, str]]:
    """Key a stage would have now, from settings and the current upstream outputs."""
    cfg = run.config
    inputs = {}
    for dep in DEPENDS[name]:
        meta = run.meta(dep)
        if meta is None:
            raise StageDependencyError(name, dep)
        inputs[dep] = meta["output_hash"]
    parts = {"stage": name, "settings": cfg.subset(SETTINGS[name]), "inputs": inputs}
    if name == "ingest":
        parts["sources"] = sources_hash(cfg.manifest)
    return _sha(json.dumps(parts, sort_keys=True).encode()), inputs


def check_upstream(run: RunDir, name: str) -> None:
    """Every ancestor must exist and match the current settings."""
    for dep in DEPENDS[name]:
        check_upstream(run, dep)
        meta = run.meta(dep)
        if meta is None:
            raise StageDependencyError(name, dep)
        key, _ = stage_key(run, dep)
        if meta["key"] != key:
            raise StaleStageError(
                f"stage {dep!r} was produced with different settings or inputs than the "
                f"current configuration; rerun `melograph {dep}` before `{name}`"
            )


# -- loaders for stage outputs -----------------------------------------------

def _pieces(stage_dir: Path) -> list[dict]:
    return json.loads((stage_dir / "pieces.json").read_text())


def load_matrices(run: RunDir, stage: str = "annotate") -> list[NoteMatrix]:
    d = run.stage(stage)
    return [read_csv(d / "notes" / f"{p['piece_id']}.csv", p["piece_id"], p["composer"]) for p in _pieces(d)]


def load_annotated(run: RunDir) -> AnnotatedCorpus:
    d = run.stage("annotate")
    matrices = load_matrices(run, "annotate")
    stats = CorpusStats.from_json((d / "corpus_stats.json").read_text())
    exp = json.loads((d / "expectancy.json").read_text())
    return AnnotatedCorpus(matrices, stats, exp)


def load_segments(run: RunDir) -> dict[str, list[Segment]]:
    corpus = load_annotated(run)
    d = run.stage("segment") / "segments"
    out = {}
    for m in corpus.matrices:
        segs = []
        for item in json.loads((d / f"{m.piece_id}.json").read_text()):
            start, stop = item["start"], item["stop"]
            segs.append(Segment(m.piece_id, item["segment_id"][1], start, stop, m.events[start:stop],
                                item["expectancy"], item["dominant"], item["bin"],
                                corpus.expectancies[m.piece_id][start:stop]))
        out[m.piece_id] = segs
    return out


def load_feature_config(run: RunDir) -> FeatureConfig:
    data = json.loads((run.stage("dtw") / "feature_config.json").read_text())
    data["channels"] = tuple(data["channels"])
    return FeatureConfig(**data)


def load_graphs(run: RunDir, k: int) -> list[SegmentGraph]:
    d = run.stage("graph")
    order = json.loads((d / "index.json").read_text())["pieces"]
    return [from_json((d / f"k{k:02d}" / f"{pid}.json").read_text()) for pid in order]


def composers(run: RunDir) -> dict[str, str]:
    return {p["piece_id"]: p["composer"] for p in _pieces(run.stage("ingest"))}


# -- stages ------------------------------------------------------------------

def _write_notes(out: Path, matrices) -> None:
    (out / "notes").mkdir()
    for m in matrices:
        write_csv(m, out / "notes" / f"{m.piece_id}.csv")
    (out / "pieces.json").write_text(_dump([
        {"piece_id": m.piece_id, "composer": m.composer, "notes": len(m.events)} for m in matrices
    ]))


def _ingest(run: RunDir, out: Path) -> None:
    matrices = []
    for e in load_manifest(run.config.manifest):
        matrices.append(parse_musicxml_file(e.path, piece_id=e.piece_id, composer=e.composer,
                                            part=e.part, melody=e.melody or run.config.melody))
    _write_notes(out, matrices)


def _annotate(run: RunDir, out: Path) -> None:
    corpus = annotate_corpus(load_matrices(run, "ingest"))
    _write_notes(out, corpus.matrices)
    (out / "corpus_stats.json").write_text(corpus.stats.to_json())
    (out / "expectancy.json").write_text(_dump(corpus.expectancies))


def _segment(run: RunDir, out: Path) -> None:
    cfg = run.config
    segments = segment_corpus(load_annotated(run), cfg.w_pitch, cfg.w_onset, cfg.min_notes)
    (out / "segments").mkdir()
    rows = [["piece", "ordinal", "start", "stop", "notes", "expectancy", "dominant", "bin", "label"]]
    for pid, segs in segments.items():
        (out / "segments" / f"{pid}.json").write_text(_dump([s.to_dict() | {"bin": s.bin} for s in segs]))
        for s in segs:
            rows.append([pid, s.ordinal, s.start, s.stop, len(s), "" if s.expectancy is None else repr(s.expectancy),
                         s.dominant, s.bin, s.label])
    (out / "segments.csv").write_text(_csv_text(rows))


def _dtw(run: RunDir, out: Path) -> None:
    cfg = run.config
    segments = load_segments(run)
    mean, std = pitch_stats(load_matrices(run, "annotate"))
    fc = FeatureConfig(mean, std, cfg.normalize_dtw)
    (out / "feature_config.json").write_text(_dump({
        "pitch_mean": fc.pitch_mean, "pitch_std": fc.pitch_std,
        "normalize": fc.normalize, "channels": list(fc.channels),
    }))
    (out / "distances").mkdir()
    cache = run.dtw_cache
    cache.mkdir(parents=True, exist_ok=True)
    with open(cache / CHUNK_LOG, "a") as chunk_log:
        for pid, segs in segments.items():
            if len(segs) < 2:
                raise DegenerateInputError(f"piece {pid!r} has {len(segs)} segment(s); DTW needs two")
            seqs = [segment_features(s, fc) for s in segs]

            def logged(start, stop, pid=pid):
                chunk_log.write(f"{pid} {start} {stop}\n")
                chunk_log.flush()

            # one store per (features, settings); edits elsewhere leave it intact
            store = cache / pid / _sha((fc.digest() + sequences_digest(seqs)).encode())[:16]
            dist = pairwise_matrix(seqs, ids=[s.segment_id for s in segs], normalize=fc.normalize,
                                   store_dir=store, config_hash=fc.digest(),
                                   chunk_size=cfg.dtw_chunk_size, on_chunk=logged)
            (out / "distances" / f"{pid}.csv").write_text(dist.to_csv())


def _graph(run: RunDir, out: Path) -> None:
    segments = load_segments(run)
    clamped: dict[str, dict[str, int]] = {}
    for k in run.config.ks:
        kd = out / f"k{k:02d}"
        kd.mkdir()
        for pid, segs in segments.items():
            dist = DistanceMatrix.from_csv((run.stage("dtw") / "distances" / f"{pid}.csv").read_text())
            k_eff = min(k, len(segs) - 1)
            if k_eff != k:
                clamped.setdefault(pid, {})[str(k)] = k_eff
            g = piece_graph(dist, segs, k_eff)
            (kd / f"{pid}.graphml").write_text(to_graphml(g))
            (kd / f"{pid}.dot").write_text(to_dot(g))
            (kd / f"{pid}.json").write_text(to_json(g))
    (out / "index.json").write_text(_dump({"pieces": list(segments), "ks": run.config.ks, "clamped": clamped}))


def _sweep(run: RunDir, out: Path) -> None:
    cfg = run.config
    report = k_sweep({k: load_graphs(run, k) for k in cfg.ks}, cfg.h, cfg.seed)
    (out / "sweep.json").write_text(report.to_json() + "\n")
    (out / "sweep.csv").write_text(report.to_csv())


def _heatmap(run: RunDir, out: Path) -> None:
    maps = corpus_heatmaps(load_graphs(run, run.config.k), composers(run), run.config.h)
    (out / "pieces.csv").write_text(maps.piecewise_csv())
    (out / "groups.csv").write_text(maps.grouped_csv())


def _mds(run: RunDir, out: Path) -> None:
    cfg = run.config
    segments = load_segments(run)
    fc = load_feature_config(run)
    graphs = load_graphs(run, cfg.k)
    pair_rows = [["piece_a", "piece_b", "tier", "wl_similarity", "stress", "silhouette", "knn_accuracy"]]
    point_rows = [["piece_a", "piece_b", "piece", "ordinal", "x", "y", "silhouette", "knn_accuracy"]]
    for a, b, sim, tier in select_pairs(graphs, cfg.h, cfg.mds_pairs_per_tier):
        fa = [segment_features(s, fc) for s in segments[a]]
        fb = [segment_features(s, fc) for s in segments[b]]
        res = joint_mds(fa, fb, fc.normalize, cfg.knn_k)
        pair_rows.append([a, b, tier, repr(sim), repr(res.stress), repr(res.silhouette_mean),
                          repr(res.knn_accuracy)])
        for seg, (x, y) in zip(segments[a] + segments[b], res.points.tolist()):
            point_rows.append([a, b, seg.piece_id, seg.ordinal, repr(x), repr(y),
                               repr(res.silhouette_mean), repr(res.knn_accuracy)])
    (out / "pairs.csv").write_text(_csv_text(pair_rows))
    (out / "points.csv").write_text(_csv_text(point_rows))


def _embed(run: RunDir, out: Path) -> None:
    cfg = run.config
    graphs = load_graphs(run, cfg.k)
    groups = composers(run)
    p = cfg.graph2vec
    model = graph2vec_train([wl_document(g, cfg.h) for g in graphs], p.dim, p.epochs, p.lr, p.negatives, cfg.seed)
    rows = [["piece", "composer", *(f"v{i}" for i in range(p.dim))]]
    for g, vec in zip(graphs, model.vectors.tolist()):
        rows.append([g.piece_id, groups[g.piece_id], *(repr(v) for v in vec)])
    (out / "vectors.csv").write_text(_csv_text(rows))
    (out / "loss.csv").write_text(_csv_text([["epoch", "loss"]] + [
        [i + 1, repr(v)] for i, v in enumerate(model.loss_history)
    ]))
    (out / "params.json").write_text(_dump(model.params | {"h": cfg.h, "k": cfg.k}))


def _cluster(run: RunDir, out: Path) -> None:
    cfg = run.config
    rows = _read_csv_rows(run.stage("embed") / "vectors.csv")
    vectors = np.array([[float(v) for key, v in r.items() if key.startswith("v")] for r in rows])
    n_clusters = cfg.clusters or len({r["composer"] for r in rows})
    n_clusters = min(n_clusters, len(rows))
    km = kmeans(vectors, n_clusters, cfg.seed)
    pca = pca_2d(vectors)
    table = [["composer", "piece", "label"]]
    scatter = [["piece", "composer", "label", "x", "y"]]
    for r, label, (x, y) in zip(rows, km.labels.tolist(), pca.points.tolist()):
        table.append([r["composer"], r["piece"], label])
        scatter.append([r["piece"], r["composer"], label, repr(x), repr(y)])
    (out / "clusters.csv").write_text(_csv_text(table))
    (out / "pca.csv").write_text(_csv_text(scatter))
    (out / "pca.json").write_text(_dump({
        "explained_variance": pca.explained_variance.tolist(),
        "components": pca.components.tolist(),
        "kmeans_inertia": km.inertia_history,
        "kmeans_iterations": km.iterations,
        "clusters": n_clusters,
    }))


BUILDERS = {
    "ingest": _ingest, "annotate": _annotate, "segment": _segment, "dtw": _dtw, "graph": _graph,
    "sweep": _sweep, "heatmap": _heatmap, "mds": _mds, "embed": _embed, "cluster": _cluster,
}


# -- entry points ------------------------------------------------------------

def _run_locked(run: RunDir, name: str, force: bool) -> str:
    check_upstream(run, name)
    key, inputs = stage_key(run, name)
    meta = run.meta(name)
    if not force and meta is not None and meta["key"] == key:
        log.info("%s: up to date", name)
        return "cached"
    log.info("%s: running", name)
    run.publish(name, lambda out: BUILDERS[name](run, out), {
        "stage": name,
        "key": key,
        "config_hash": run.config.digest(SETTINGS[name]),
        "inputs": inputs,
    })
    return "ran"


def run_stage(config: PipelineConfig, name: str, force: bool = False) -> str:
    """Run one stage. Returns "ran" or "cached"."""
    if name not in BUILDERS:
        raise PipelineError(f"unknown stage {name!r}; choose from {', '.join(STAGES)}")
    run = RunDir(config)
    with run.lock():
        return _run_locked(run, name, force)


def run_all(config: PipelineConfig, force: bool = False) -> dict[str, str]:
    run = RunDir(config)
    with run.lock():
        return {name: _run_locked(run, name, force) for name in STAGES}


def report(config: PipelineConfig) -> dict:
    """Summarise the sweep, heatmap and cluster stages into report/summary.{json,txt}."""
    run = RunDir(config)
    with run.lock():
        for needed in ("sweep", "heatmap", "cluster"):
            if run.meta(needed) is None:
                raise StageDependencyError("report", needed)
        levels = []
        for r in _read_csv_rows(run.stage("sweep") / "sweep.csv"):
            levels.append({
                "k": int(r["k"]),
                "mean_intra": float(r["mean_intra"]),
                "mean_inter": float(r["mean_inter"]),
                "d": float(r["d"]),
                "auc": float(r["auc"]),
                "p_fdr": float(r["p_fdr"]) if r["p_fdr"] else None,
            })
        group_rows = list(csv.reader(open(run.stage("heatmap") / "groups.csv", newline="")))
        groups = group_rows[0][1:]
        matrix = [[float(v) if v else None for v in row[1:]] for row in group_rows[1:]]
        clusters = [{"composer": r["composer"], "piece": r["piece"], "label": int(r["label"])}
                    for r in _read_csv_rows(run.stage("cluster") / "clusters.csv")]
        summary = {
            "operating_k": config.k,
            "h": config.h,
            "k_levels": levels,
            "group_heatmap": {"groups": groups, "matrix": matrix},
            "clusters": clusters,
            "stage_hashes": {s: (run.meta(s) or {}).get("output_hash") for s in STAGES},
        }

        def build(out: Path):
            (out / "summary.json").write_text(_dump(summary))
            (out / "summary.txt").write_text(summary_text(summary))

        run.publish("report", build, {"stage": "report", "key": None, "inputs": {}})
    return summary


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def summary_text(summary: dict) -> str:
    lines = [f"operating k = {summary['operating_k']}, WL iterations h = {summary['h']}", "",
             "k-sweep (intra vs inter graph similarity)",
             f"{'k':>3} {'intra':>8} {'inter':>8} {'d':>8} {'AUC':>8} {'p_fdr':>10}"]
    for lv in summary["k_levels"]:
        lines.append(f"{lv['k']:>3} {_fmt(lv['mean_intra']):>8} {_fmt(lv['mean_inter']):>8} "
                     f"{_fmt(lv['d']):>8} {_fmt(lv['auc']):>8} {_fmt(lv['p_fdr']):>10}")
    hm = summary["group_heatmap"]
    lines += ["", "group similarity", "  ".join(["group", *hm["groups"]])]
    for g, row in zip(hm["groups"], hm["matrix"]):
        lines.append("  ".join([g, *(_fmt(v) for v in row)]))
    lines += ["", "clusters", "composer  piece  label"]
    for c in summary["clusters"]:
        lines.append(f"{c['composer']}  {c['piece']}  {c['label']}")
    return "\n".join(lines) + "\n"
