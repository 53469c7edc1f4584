import sys

import pytest

from unbiased_es.delay_es import DelayLoopParams
from unbiased_es.maps import QuadraticMap
from unbiased_es.signals import DitherParams


@pytest.fixture
def qmap():
    return QuadraticMap(1.0, 2.0, 2.0)


@pytest.fixture
def dither5():
    return DitherParams(0.8, 5.0, 0.04, 5.0)


@pytest.fixture
def dither1():
    return DitherParams(0.8, 5.0, 0.04, 1.0)


@pytest.fixture
def delay_params(qmap, dither5):
    return DelayLoopParams(k=0.03, dither=dither5, omega_h=1.0, map=qmap)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
