import math

import pytest
from hypothesis import settings

from bbsim.engine import KERNELS

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

ALPHA = math.sqrt(0.1 / 0.51)
BACKENDS = sorted(KERNELS)

# (criterion, passed, detail) lines, echoed at the end of the session
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical runs")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")


def ulps(a, b):
    """Distance between two floats in units of the spacing at the larger one."""
    scale = max(abs(a), abs(b))
    return abs(a - b) / math.ulp(scale) if scale else 0.0


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param
