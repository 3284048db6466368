from collections import defaultdict

import pytest

_criteria = defaultdict(dict)  # criterion -> {test name: passed}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    results = _criteria[marker.args[0]]
    if report.failed or report.skipped:
        results[item.name] = False
    elif report.when == "call":
        results.setdefault(item.name, True)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        results = _criteria[k]
        failed = [name for name, ok in results.items() if not ok]
        line = f"criterion {k:2d}: {'FAIL' if failed else 'PASS'}"
        if failed:
            line += f" ({', '.join(failed)})"
        terminalreporter.write_line(line)
