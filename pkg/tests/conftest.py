import re

_criteria: dict[int, list] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        entry = _criteria.setdefault(int(m.group(1)), [m.group(2), True])
        entry[1] = entry[1] and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        name, ok = _criteria[num]
        terminalreporter.write_line(f"criterion {num:2d} {name:<32} {'PASS' if ok else 'FAIL'}")
