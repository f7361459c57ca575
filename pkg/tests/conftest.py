from __future__ import annotations

import pytest

from chris.difficulty import rf_train, window_dataset
from chris.signal import synth_trace, windows


@pytest.fixture(scope="session")
def uniform_trace():
    """Nine activity segments of 50 windows each at 90 BPM."""
    return synth_trace(range(1, 10), 50, 90.0, seed=1)


@pytest.fixture(scope="session")
def uniform_windows(uniform_trace):
    return windows(uniform_trace)


@pytest.fixture(scope="session")
def forest():
    train = windows(synth_trace(range(1, 10), 60, 80.0, seed=11))
    return rf_train(window_dataset(train), seed=0)


_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
