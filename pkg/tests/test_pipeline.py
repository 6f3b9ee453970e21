import json
import multiprocessing as mp

import pytest

from melograph.config import load_config
from melograph.errors import StageDependencyError, StaleStageError
from melograph.pipeline import (
    CHUNK_LOG,
    STAGES,
    PipelineError,
    RunDir,
    load_manifest,
    report,
    run_all,
    run_stage,
)


def test_smoke_run_creates_every_stage(small_run):
    cfg = load_config(small_run)
    assert run_all(cfg) == {s: "ran" for s in STAGES}
    for s in STAGES:
        meta = RunDir(cfg).meta(s)
        assert meta["stage"] == s and meta["output_hash"]
    out = cfg.output
    assert sorted(p.name for p in (out / "graph").iterdir() if p.is_dir()) == [f"k{k:02d}" for k in cfg.ks]
    assert not list(out.glob(".tmp-*")) and not list(out.glob(".old-*"))
    assert (out / ".cache" / "dtw" / CHUNK_LOG).exists()


def test_rerun_is_cached_and_h_change_is_selective(small_run, tmp_path):
    cfg = load_config(small_run)
    run_all(cfg)
    assert set(run_all(cfg).values()) == {"cached"}
    changed = run_all(load_config(small_run, h=2))
    ran = {s for s, v in changed.items() if v == "ran"}
    assert ran == {"sweep", "heatmap", "mds", "embed", "cluster"}


def test_operating_k_does_not_rebuild_graphs(small_run):
    run_all(load_config(small_run))
    changed = run_all(load_config(small_run, k=4))
    assert changed["graph"] == "cached" and changed["dtw"] == "cached"
    assert changed["heatmap"] == "ran"


def test_missing_upstream(small_run):
    with pytest.raises(StageDependencyError):
        run_stage(load_config(small_run), "dtw")


def test_stale_upstream(small_run):
    cfg = load_config(small_run)
    run_all(cfg)
    with pytest.raises(StaleStageError, match="segment"):
        run_stage(load_config(small_run, min_notes=3), "dtw")


def test_unknown_stage(small_run):
    with pytest.raises(PipelineError):
        run_stage(load_config(small_run), "plot")


def test_report_matches_stage_outputs(small_run):
    cfg = load_config(small_run)
    run_all(cfg)
    summary = report(cfg)
    assert [lv["k"] for lv in summary["k_levels"]] == list(range(2, 13))
    sweep = json.loads((cfg.output / "sweep" / "sweep.json").read_text())
    for lv, ref in zip(summary["k_levels"], sweep["levels"]):
        assert lv["mean_intra"] == ref["mean_intra"]
        assert lv["auc"] == ref["auc"]
    saved = json.loads((cfg.output / "report" / "summary.json").read_text())
    assert saved["clusters"] == summary["clusters"]
    assert len(summary["clusters"]) == 3
    text = (cfg.output / "report" / "summary.txt").read_text()
    assert "k-sweep" in text and len([ln for ln in text.splitlines() if ln[:3].strip().isdigit()]) >= 11


def test_report_needs_stages(small_run):
    with pytest.raises(StageDependencyError):
        report(load_config(small_run))


def _hold_lock(config_path, ready, release):
    cfg = load_config(config_path)
    with RunDir(cfg).lock():
        ready.set()
        release.wait(10)


def test_lock_blocks_concurrent_runs(small_run):
    ctx = mp.get_context("fork")
    ready, release = ctx.Event(), ctx.Event()
    proc = ctx.Process(target=_hold_lock, args=(small_run, ready, release))
    proc.start()
    try:
        assert ready.wait(10)
        with pytest.raises(PipelineError, match="lock"):
            run_stage(load_config(small_run), "ingest")
    finally:
        release.set()
        proc.join()
    assert run_stage(load_config(small_run), "ingest") == "ran"


def test_two_runs_are_byte_identical(tmp_path):
    from conftest import write_run

    outputs = []
    for name in ("a", "b"):
        root = tmp_path / name
        root.mkdir()
        cfg = load_config(write_run(root))
        run_all(cfg)
        files = {}
        for s in STAGES:
            for p in sorted((cfg.output / s).rglob("*")):
                if p.is_file() and p.name != "_meta.json":
                    files[p.relative_to(cfg.output).as_posix()] = p.read_bytes()
        outputs.append(files)
    assert outputs[0].keys() == outputs[1].keys()
    assert outputs[0] == outputs[1]


def test_force_reruns(small_run):
    cfg = load_config(small_run)
    run_stage(cfg, "ingest")
    assert run_stage(cfg, "ingest") == "cached"
    assert run_stage(cfg, "ingest", force=True) == "ran"


def test_manifest_duplicates_rejected(tmp_path):
    (tmp_path / "m.yaml").write_text("pieces:\n - {path: a.musicxml, piece_id: x}\n - {path: b.musicxml, piece_id: x}\n")
    with pytest.raises(PipelineError, match="duplicate"):
        load_manifest(tmp_path / "m.yaml")


def test_source_edit_invalidates_ingest(small_run):
    cfg = load_config(small_run)
    run_stage(cfg, "ingest")
    score = next((small_run.parent / "corpus").glob("*.musicxml"))
    score.write_text(score.read_text().replace("<octave>4</octave>", "<octave>5</octave>", 1))
    assert run_stage(cfg, "ingest") == "ran"
