import math
from fractions import Fraction

import pytest
from hypothesis import settings

from oritrans.currents import MailingInstance
from oritrans.steiner import PartitionedInstance

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

SQRT3 = math.sqrt(3)
SQUARE = [(1, 1), (-1, 1), (-1, -1), (1, -1)]  # p1..p4 counter-clockwise


@pytest.fixture
def square_instance():
    """Opposite corners of the square [-1, 1]^2 in the same group."""
    return PartitionedInstance.of(SQUARE, [[0, 2], [1, 3]])


@pytest.fixture
def square_value():
    return 2 + 2 * SQRT3


@pytest.fixture
def triangle_mailing():
    pts = [(0, 0), (4, 0), (2, 3)]
    return MailingInstance.of(pts, [[0, 0, 1], [0, 0, 1], [0, 0, 0]])


def frac_points(pts):
    return [tuple(Fraction(x) for x in p) for p in pts]


# -- acceptance summary ---------------------------------------------------------------

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if not item.nodeid.split("::")[-1].startswith("test_criterion_"):
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if report.when == "call" or report.failed:
        prev = _CRITERIA.get(item.nodeid, (doc, "PASS"))[1]
        _CRITERIA[item.nodeid] = (doc, "FAIL" if report.failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for doc, verdict in _CRITERIA.values():
        terminalreporter.write_line(f"{verdict}  criterion {doc}")
