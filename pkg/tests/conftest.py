import numpy as np
import pytest

from seagull.fib import ForwardingGraph

# seven-AS sample: x1..x6 -> 1..6, destination -> 7
DST = 7
SAMPLE_LINKS = "\n".join(f"{a} {b}" for a, b in [
    (1, 3), (3, 6), (2, 5), (5, 7), (4, 5), (6, 7),          # forwarding edges
    (4, 3), (4, 2), (1, 2), (3, 2), (1, 6), (4, 6),          # remaining links
])
SAMPLE_TREE = ((1, 3), (3, 6), (2, 5), (5, 7), (4, 5), (6, 7), (7, 7))
LOOPED = ((1, 3), (3, 6), (2, 5), (5, 7), (4, 5), (6, 1), (7, 7))
PRE_UPDATE = ((1, 3), (3, 6), (2, 5), (5, 7), (4, 5), (6, 7), (7, 7))
PARTIAL_TABLE = ((1, 2), (3, 6), (2, 5), (4, 5))
PARTIAL_REVERSED = [(2, 1), (6, 3), (5, 2), (5, 4)]


@pytest.fixture
def tree7():
    return ForwardingGraph(DST, SAMPLE_TREE)


@pytest.fixture
def looped7():
    return ForwardingGraph(DST, LOOPED)


@pytest.fixture
def pre_update():
    return ForwardingGraph(DST, PRE_UPDATE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- acceptance summary

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        prev = _CRITERIA.get(num, (title, "PASS"))[1]
        status = "PASS" if rep.passed and prev == "PASS" else "FAIL"
        _CRITERIA[num] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, status = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")
