"""Shared fixtures: the default gain schedule is synthesized once per session."""

import time

import pytest

from robust_indi.cli import main
from robust_indi.synthesis import load_schedule

# filled by test_acceptance, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}
TIMINGS: dict[str, float] = {}


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth_a")
    t0 = time.perf_counter()
    rc = main(["synthesize", "--out", str(out)])
    TIMINGS["synthesis"] = time.perf_counter() - t0
    if rc != 0:
        pytest.fail(f"default synthesis exited with {rc}")
    return out


@pytest.fixture(scope="session")
def schedule(synth_dir):
    return load_schedule(synth_dir / "schedule.json")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
