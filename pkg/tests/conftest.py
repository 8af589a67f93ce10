import warnings

import pytest

from pluripot.convex import CoverageWarning

ACCEPTANCE: dict = {}


@pytest.fixture(autouse=True)
def _quiet_coverage():
    # clipped-gradient warnings are expected on the coarse battery grids
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
