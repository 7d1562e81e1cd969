import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsframe import _kernels

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(_kernels.backends()))
def backend(request):
    return _kernels.backends()[request.param]


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records the outcome line for criterion ``n``."""

    def log(n, ok, detail):
        request.config._acceptance[n] = (ok, detail)

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    res = getattr(config, "_acceptance", {})
    if not res:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(res):
        ok, detail = res[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
