from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: dict[int, tuple[str, str]] = {}


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / name


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


def pytest_runtest_logreport(report):
    item_marker = getattr(report, "criterion", None)
    if item_marker is None:
        return
    number, title = item_marker
    failed = report.failed
    if report.when == "call" or failed:
        status = "FAIL" if failed else ("SKIP" if report.skipped else "PASS")
        prev = _criteria.get(number)
        if prev is None or prev[1] == "PASS":
            _criteria[number] = (title, status)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}: {title}")


def write_run(root: Path, pieces=3, styles=3, seed=0, phrases=6, **settings) -> Path:
    """Write a synthetic corpus and a pipeline config under ``root``; return the config path."""
    import yaml

    from melograph.synth import generate_corpus, write_corpus

    manifest = write_corpus(generate_corpus(pieces, styles, seed=seed, phrases=phrases), root / "corpus")
    data = {"manifest": str(manifest.relative_to(root)), "output": "out",
            "graph2vec": {"dim": 16, "epochs": 10}} | settings
    path = root / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


@pytest.fixture
def small_run(tmp_path):
    return write_run(tmp_path)
