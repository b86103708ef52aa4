import numpy as np
import pytest

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def record():
    """Store one acceptance line: record(criterion, status, detail)."""
    def _record(criterion: str, status: str, detail: str = ""):
        _ACCEPTANCE.append((criterion, status, detail))
        print(f"[{status}] {criterion}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status:7s} {criterion}  {detail}")
