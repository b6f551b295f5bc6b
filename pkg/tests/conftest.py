import pytest

from netpoint.scenario import reference_scenario

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def reference():
    return reference_scenario()


@pytest.fixture
def acceptance_report():
    def report(criterion, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
