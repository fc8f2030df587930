import math

import pytest
from hypothesis import settings

from nehari import CoefficientProfile, ProblemParams
from nehari.ground_state import cached_limit

settings.register_profile("nehari", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("nehari")

# desk configurations shared by several test modules
P1 = ProblemParams(N=1, p=3.0)
P2 = ProblemParams(N=2, p=3.0)
SIGMA_H4 = 0.25
H3_A = CoefficientProfile.bump(1.0, 1.0)
H3_B = CoefficientProfile.exp(1.0, 0.5)
H4_A = CoefficientProfile.exp(0.01, 0.5 * math.sqrt(SIGMA_H4))
H4_B = CoefficientProfile.bump(1.0, 1.0)


@pytest.fixture(scope="session")
def lim1():
    return cached_limit(P1)


@pytest.fixture(scope="session")
def lim2():
    return cached_limit(P2)


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = {}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d} [{title}]: {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
