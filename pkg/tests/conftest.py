"""Acceptance bookkeeping.

Tests tagged ``@pytest.mark.criterion(k, "title")`` are grouped by ``k``.  A
criterion passes when every test tagged with it passes.  The terminal summary
then prints one PASS/FAIL line per criterion.
"""

import pytest

_results: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when != "call" and not report.failed:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "passed": True, "failures": []})
    if report.failed or report.skipped:
        entry["passed"] = False
        entry["failures"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        status = "PASS" if entry["passed"] else "FAIL"
        line = f"[{status}] {number:>2}. {entry['title']}"
        if entry["failures"]:
            line += f"  (failed: {', '.join(entry['failures'])})"
        terminalreporter.write_line(line)
