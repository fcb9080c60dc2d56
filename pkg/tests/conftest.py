import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _criteria[num] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, status = _criteria[num]
        terminalreporter.write_line(f"{status} criterion {num:2d}: {title}")


@st.composite
def spectra(draw, min_n=2, max_n=6):
    """Distinct eigenvalues, decreasing, spanning a few orders of magnitude."""
    n = draw(st.integers(min_n, max_n))
    logs = draw(st.lists(st.floats(-3.0, 3.0), min_size=n, max_size=n, unique=True))
    lam = np.sort(10.0 ** np.array(logs))[::-1]
    if np.any(np.diff(lam) >= 0):
        from hypothesis import assume
        assume(False)
    return lam


def states(n):
    return st.lists(st.floats(-10.0, 10.0), min_size=n, max_size=n).map(np.array).filter(
        lambda x: np.max(np.abs(x)) > 1e-3)
