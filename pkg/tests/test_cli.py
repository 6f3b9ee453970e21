import subprocess
import sys

from melograph.cli import main


def test_synth_then_stages(tmp_path, capsys):
    assert main(["synth", "--pieces", "3", "--styles", "3", "--phrases", "6", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "manifest.yaml").exists()
    cfg = tmp_path / "run.yaml"
    cfg.write_text("manifest: c/manifest.yaml\noutput: out\ngraph2vec: {dim: 8, epochs: 5}\n")
    assert main(["ingest", "--config", str(cfg)]) == 0
    assert "ingest: ran" in capsys.readouterr().out
    assert main(["ingest", "--config", str(cfg)]) == 0
    assert "ingest: cached" in capsys.readouterr().out
    assert main(["all", "--config", str(cfg)]) == 0
    capsys.readouterr()
    assert main(["report", "--config", str(cfg)]) == 0
    assert "k-sweep" in capsys.readouterr().out


def test_errors_exit_with_code_two(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("manifest: nowhere.yaml\noutput: out\nk: 99\n")
    assert main(["ingest", "--config", str(cfg)]) == 2
    assert "melograph: error" in capsys.readouterr().err
    cfg.write_text("manifest: nowhere.yaml\noutput: out\n")
    assert main(["dtw", "--config", str(cfg)]) == 2
    assert "ingest" in capsys.readouterr().err


def test_console_script_help():
    result = subprocess.run([sys.executable, "-m", "melograph.cli", "--help"], capture_output=True, text=True)
    assert result.returncode == 0
    for stage in ("ingest", "dtw", "cluster", "report", "synth"):
        assert stage in result.stdout
