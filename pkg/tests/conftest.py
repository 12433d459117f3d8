import pytest

from invar_opt import corpus
from invar_opt.frontend import LoweringOptions, compile_source


@pytest.fixture
def lower():
    def _lower(source, strict=True, force=False):
        return compile_source(source, LoweringOptions(strict, force))

    return _lower


@pytest.fixture
def program():
    return corpus.load


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
