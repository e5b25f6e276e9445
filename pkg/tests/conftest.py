"""Shared pytest wiring: one [PASS]/[FAIL] line per acceptance criterion."""

import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if "test_acceptance" not in report.nodeid:
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if report.when == "call":
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        _results[report.nodeid] = (doc, status)
    elif report.when == "setup" and not report.passed:
        _results[report.nodeid] = (doc, "SKIP" if report.skipped else "FAIL")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_results):
        doc, status = _results[nodeid]
        terminalreporter.write_line(f"[{status}] {doc}")
