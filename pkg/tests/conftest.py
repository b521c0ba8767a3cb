import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from simlab.domain import PolarGrid, RadialDomain

settings.register_profile(
    "simlab", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("simlab")


@pytest.fixture
def annulus_grid():
    return PolarGrid(RadialDomain(0.5, 1.0), 16, 32)


@pytest.fixture
def disk_grid():
    return PolarGrid(RadialDomain(0.0, 1.0), 16, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria record one verdict each; printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
