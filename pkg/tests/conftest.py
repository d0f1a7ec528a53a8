import pytest

from hdqkd.config import DEFAULT_CONFIG


@pytest.fixture
def cfg():
    return DEFAULT_CONFIG


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
