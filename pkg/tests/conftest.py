import pytest

# (criterion label, passed, detail), appended by test_acceptance
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    def record(label: str, passed: bool, detail: str = ""):
        ACCEPTANCE_LINES.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
