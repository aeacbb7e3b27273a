import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, str] = {}


def pytest_runtest_logreport(report):
    marker = report.keywords.get("acceptance") if hasattr(report, "keywords") else None
    if marker is None:
        return
    number = _criterion_of(report)
    if number is None:
        return
    if report.failed:
        _criteria[number] = "FAIL"
    elif report.when == "call" and report.passed:
        _criteria.setdefault(number, "PASS")


def _criterion_of(report):
    # the node id carries the number: test_criterion_<n>_...
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return None
    return int(name.split("_")[2])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        terminalreporter.write_line(f"criterion {number}: {_criteria[number]}")
