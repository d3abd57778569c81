import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from switchspin import SystemParams, derive_frame

settings.register_profile(
    "switchspin", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("switchspin")


@pytest.fixture(scope="session")
def ref_params():
    return SystemParams(A=1.0, B=1.0, omega_I=-0.5)


@pytest.fixture(scope="session")
def ref_frame(ref_params):
    return derive_frame(ref_params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_params(rng):
    """Draw with A, B > 0 and omega_I != 0 so both manifolds precess differently."""
    while True:
        A, B = rng.uniform(0.2, 2.0, size=2)
        w = rng.uniform(-2.0, 2.0)
        if abs(w) > 0.05 and abs(abs(w) - A / 2) > 0.05:
            return SystemParams(float(A), float(B), float(w))


TAU = 2 * math.pi


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
