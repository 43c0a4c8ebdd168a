"""Shared fixtures and the acceptance-criteria summary hook.

The golden configs under ``tests/golden/`` pin the reference scenarios;
their worlds (pretrained adapter + fitted prototype classifier) are
expensive enough to build once per session and share.

Tests marked ``@pytest.mark.criterion(n, "...")`` feed a summary that
prints one PASS/FAIL line per acceptance criterion at the end of the
run.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

import sail

GOLDEN_DIR = Path(__file__).parent / "golden"

_CRITERION_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(number, description): marks a test as covering one acceptance criterion",
    )


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when in ("setup", "call"):
        number = int(marker.args[0])
        description = str(marker.args[1])
        entry = _CRITERION_RESULTS.setdefault(
            number, {"description": description, "status": "PASS"}
        )
        if report.skipped:
            entry["status"] = "SKIP"
        elif report.outcome != "passed" and not (
            report.when == "setup" and report.outcome == "passed"
        ):
            entry["status"] = "FAIL"
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_RESULTS):
        entry = _CRITERION_RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number} {entry['status']} - {entry['description']}"
        )


# ---------------------------------------------------------------------------
# Golden configs and worlds
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def thresholds() -> dict:
    with open(GOLDEN_DIR / "thresholds.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def corruption_config() -> sail.RunConfig:
    return sail.load_config(GOLDEN_DIR / "corruption.toml")


@pytest.fixture(scope="session")
def corruption_world(corruption_config) -> sail.World:
    return sail.build_world(corruption_config)


@pytest.fixture(scope="session")
def recurring_config() -> sail.RunConfig:
    return sail.load_config(GOLDEN_DIR / "recurring.toml")


@pytest.fixture(scope="session")
def recurring_world(recurring_config) -> sail.World:
    return sail.build_world(recurring_config)


@pytest.fixture(scope="session")
def abrupt_config() -> sail.RunConfig:
    return sail.load_config(GOLDEN_DIR / "abrupt.toml")


@pytest.fixture(scope="session")
def abrupt_world(abrupt_config) -> sail.World:
    return sail.build_world(abrupt_config)


# ---------------------------------------------------------------------------
# A small fast configuration for harness/CLI tests
# ---------------------------------------------------------------------------

TINY_TOML = """\
[run]
seeds = [7]
lr = 0.5

[adapter]
d_in = 8
widths = [8, 6]
n_classes = 4

[pretrain]
epochs = 8
n_samples = 320
holdout_samples = 96

[generalist]
feature_dim = 24
samples_per_domain = 120
broad_rotation_seeds = [0, 303]
broad_severities = [2, 3]

[stream]
preset = "corruption"
base_seed = 99
batch_size = 16
batches_per_segment = 3
severities = [1, 3]
rotation_seed = 303
rotation_strength = 0.6
"""


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory) -> sail.RunConfig:
    path = tmp_path_factory.mktemp("config") / "tiny.toml"
    path.write_text(TINY_TOML, encoding="utf-8")
    return sail.load_config(path)


@pytest.fixture(scope="session")
def tiny_world(tiny_config) -> sail.World:
    return sail.build_world(tiny_config)


@pytest.fixture()
def tiny_config_file(tmp_path) -> Path:
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_TOML, encoding="utf-8")
    return path
