import pytest

from . import criteria


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter):
    if not criteria.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in criteria.summary_lines():
        terminalreporter.write_line(line)
