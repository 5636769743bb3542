import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)")
_outcomes: dict[int, str] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.outcome != "passed":
        failed = report.outcome != "passed"
        if failed or n not in _outcomes:
            _outcomes[n] = "FAIL" if failed else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        terminalreporter.write_line(f"Criterion {n:2d}: {_outcomes[n]}")


@pytest.fixture(scope="session")
def bloch_ref():
    from cfzero.model import REFERENCE_BLOCH

    return REFERENCE_BLOCH


@pytest.fixture(scope="session")
def circuit_ref():
    from cfzero.model import REFERENCE_CIRCUIT

    return REFERENCE_CIRCUIT
