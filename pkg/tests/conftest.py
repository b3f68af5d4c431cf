"""Collects acceptance results and prints one line per criterion at the end of the run."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")
_results: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _results.setdefault(int(match.group(1)), []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        outcomes = _results.get(number)
        status = "NOT RUN" if not outcomes else ("PASS" if all(outcomes) else "FAIL")
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
