import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mechdelin.partition import ThinCellWarning

settings.register_profile(
    "default",
    max_examples=int(os.environ.get("MECHDELIN_HYPOTHESIS_EXAMPLES", 40)),
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_thin_cells():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThinCellWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(LINES):
            terminalreporter.write_line(LINES[key])
