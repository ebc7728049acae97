import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mirrorent.model import figure2_params

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

OMEGA = 2 * math.pi * 1e7
DELTA_OPT = 0.8125 * OMEGA
# numerical maximum of the zero-temperature detuning curve (see test_acceptance)
DELTA_PEAK = 0.9857 * OMEGA


@pytest.fixture
def fig2():
    return figure2_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
