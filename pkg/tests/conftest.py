import pytest

from virtualcell import baseline
from virtualcell.analytic import AnalyticParams, QuadratureSpec, build_weight_table

ACCEPTANCE_LINES = []
DIAGNOSTIC_LINES = []


@pytest.fixture(scope="session")
def cfg():
    return baseline()


@pytest.fixture(scope="session")
def params(cfg):
    return AnalyticParams.from_config(cfg)


@pytest.fixture(scope="session")
def quad():
    return QuadratureSpec()


@pytest.fixture(scope="session")
def table(params, quad):
    return build_weight_table(params, quad)


def pytest_terminal_summary(terminalreporter):
    for title, lines in (("diagnostics", DIAGNOSTIC_LINES), ("acceptance criteria", ACCEPTANCE_LINES)):
        if lines:
            terminalreporter.section(title)
            for line in lines:
                terminalreporter.write_line(line)
