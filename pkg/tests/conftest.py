import numpy as np
import pytest

_CRITERIA = {}


@pytest.fixture
def record_criterion():
    """Store ``(number, title, passed, detail)`` for the end-of-run acceptance table."""
    def record(number, title, passed, detail=""):
        _CRITERIA[number] = (title, bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
