import pytest

_CRITERIA = []


@pytest.fixture
def record_criterion():
    def record(number, text, ok):
        _CRITERIA.append((number, text, ok))
        print(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {text}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, ok in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")
