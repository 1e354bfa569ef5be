import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_line(request):
    """Record a one-line verdict for an acceptance criterion."""

    def record(key, ok, detail):
        ACCEPTANCE_LINES[key] = f"{key} {'PASS' if ok else 'FAIL'}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[2:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
