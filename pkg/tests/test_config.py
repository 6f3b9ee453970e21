from pathlib import Path

import pytest

from melograph.config import ConfigError, PipelineConfig, load_config, write_config


def write(tmp_path, text):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    return path


def test_defaults_and_relative_paths(tmp_path):
    cfg = load_config(write(tmp_path, "manifest: corpus/manifest.yaml\noutput: out\n"))
    assert cfg.manifest == (tmp_path / "corpus/manifest.yaml").resolve()
    assert cfg.output == (tmp_path / "out").resolve()
    assert (cfg.k, cfg.h, cfg.k_min, cfg.k_max, cfg.seed) == (8, 3, 2, 12, 0)
    assert cfg.ks == list(range(2, 13))
    assert cfg.graph2vec.dim == 128


def test_overrides(tmp_path):
    cfg = load_config(write(tmp_path, "manifest: m.yaml\noutput: out\nh: 2\n"), h=4, k=None)
    assert cfg.h == 4 and cfg.k == 8


@pytest.mark.parametrize("body", [
    "output: out\n",
    "manifest: m\noutput: out\nbogus: 1\n",
    "manifest: m\noutput: out\nk: 20\n",
    "manifest: m\noutput: out\nk_min: 5\nk_max: 3\n",
    "manifest: m\noutput: out\nh: 11\n",
    "manifest: m\noutput: out\nseed: null\n",
    "manifest: m\noutput: out\nseed: 1.5\n",
    "manifest: m\noutput: out\nmelody: middle\n",
    "manifest: m\noutput: out\ngraph2vec: {width: 3}\n",
    "- a\n- b\n",
])
def test_rejects_bad_settings(tmp_path, body):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, body))


def test_subset_hashing_is_selective(tmp_path):
    base = PipelineConfig(Path("m"), Path("o"))
    other = PipelineConfig(Path("m"), Path("o"), h=2)
    assert base.digest(["k_min", "k_max"]) == other.digest(["k_min", "k_max"])
    assert base.digest(["h"]) != other.digest(["h"])
    assert base.subset(["h", "k"]) == '{"h": 3, "k": 8}'


def test_write_round_trip(tmp_path):
    cfg = load_config(write(tmp_path, "manifest: m.yaml\noutput: out\nk: 5\ngraph2vec: {dim: 8}\n"))
    write_config(cfg, tmp_path / "copy.yaml")
    assert load_config(tmp_path / "copy.yaml") == cfg
