from __future__ import annotations

import pytest

_criteria: dict[int, str] = {}
_outcomes: dict[int, list[str]] = {}
_node_criterion: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(config, items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            num, title = m.args
            _criteria[num] = title
            _node_criterion[item.nodeid] = num


def pytest_runtest_logreport(report):
    num = _node_criterion.get(report.nodeid)
    if num is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(num, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        outs = _outcomes.get(num, [])
        status = "PASS" if outs and all(o == "passed" for o in outs) else ("NOT RUN" if not outs else "FAIL")
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {_criteria[num]}")


@pytest.fixture
def rng():
    import random

    return random.Random(20240531)
