import pytest

from kreinlab import SLProblem, TruncationPolicy

HALF_LINE_CUTS = TruncationPolicy(cutoffs=(2.5, 5, 10, 20, 40))


@pytest.fixture(scope="session")
def half_line():
    return SLProblem.from_strings(0, "inf", q1="1", truncation=HALF_LINE_CUTS)


@pytest.fixture(scope="session")
def unit_interval():
    return SLProblem.from_strings(0, 1, q1="1")


@pytest.fixture(scope="session")
def frobenius():
    return SLProblem.from_strings(0, 1, q1="-(3/16)/(1-x)^2")


@pytest.fixture(scope="session")
def complex_interval():
    return SLProblem.from_strings(0, 1, q1="1", q2="0.5")


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        props = dict(report.user_properties)
        name = report.nodeid.split("::")[-1]
        _CRITERIA[name] = (report.passed, props.get("criterion", name), props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        passed, title, detail = _CRITERIA[name]
        line = "%s  %s" % ("PASS" if passed else "FAIL", title)
        terminalreporter.write_line(line + ("  [%s]" % detail if detail else ""))
