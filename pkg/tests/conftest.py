from __future__ import annotations

import pytest

from dyadchat.actions import load_canonical_library
from dyadchat.interpret import OfflineProvider

CRITERIA = [
    "worked-arithmetic",
    "reaction-dominance",
    "score-decomposition-and-oracle",
    "preference-clamp-and-monotonicity",
    "ephemeral-vs-persistent-session",
    "tag-and-caption-determinism",
    "protocol-ordering-and-latency",
    "library-lint",
]


@pytest.fixture(scope="session")
def canonical():
    return load_canonical_library()


@pytest.fixture(scope="session")
def provider():
    return OfflineProvider(dimension=128)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): ties a test to one acceptance criterion"
    )
    config._acceptance_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    results = item.config._acceptance_results
    if report.failed:
        results[name] = False
    elif report.when == "call" and report.passed:
        results.setdefault(name, True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in CRITERIA:
        if name in results:
            verdict = "PASS" if results[name] else "FAIL"
            terminalreporter.write_line(f"[{verdict}] {name}")
