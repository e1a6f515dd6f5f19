import pytest

from clusterval import load_iris
from clusterval.scaling import fit_transform

# Filled by test_acceptance.py; printed at the end of the session.
ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def iris():
    return load_iris()


@pytest.fixture(scope="session")
def iris_unitnorm(iris):
    return fit_transform("unitnorm", iris.matrix)[1]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
