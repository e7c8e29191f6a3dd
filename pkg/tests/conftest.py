import numpy as np
import pytest

from kgzlab.grid import GridSpec

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def box32():
    return GridSpec.box(12.0, 32)


@pytest.fixture(scope="session")
def radial():
    return GridSpec.radial(30.0, 600)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if not rep.passed and call.excinfo is not None:
        detail = f"{detail} [{call.excinfo.typename}: {str(call.excinfo.value).splitlines()[0][:160]}]".strip()
    _CRITERIA[number] = f"{'PASS' if rep.passed else 'FAIL'}  criterion {number:>2}: {title}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
