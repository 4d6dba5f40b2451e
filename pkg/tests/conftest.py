import numpy as np
import pytest

from twistorcheck import kahler

_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        label = name.replace("test_criterion_", "criterion ").replace("_", " ")
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {label}")


@pytest.fixture(scope="session")
def flat():
    return kahler.get_fixture("flat")


@pytest.fixture(scope="session")
def fubini_study():
    return kahler.get_fixture("fubini_study")


@pytest.fixture(scope="session")
def eguchi_hanson():
    return kahler.get_fixture("eguchi_hanson", a=1.0)


@pytest.fixture(scope="session")
def burns():
    return kahler.get_fixture("burns", m=1.0)


@pytest.fixture(scope="session")
def all_fixtures(flat, fubini_study, eguchi_hanson, burns):
    return {"flat": flat, "fubini_study": fubini_study,
            "eguchi_hanson": eguchi_hanson, "burns": burns}


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
