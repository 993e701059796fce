import numpy as np
import pytest

from timedd import ProblemParams

# criterion number -> (passed, line); filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key][1])
    passed = sum(ok for ok, _ in ACCEPTANCE_LINES.values())
    terminalreporter.write_line(f"{passed}/{len(ACCEPTANCE_LINES)} acceptance criteria passed")


@pytest.fixture
def base_params():
    return ProblemParams(nu=0.1, gamma=0.0, T=1.0, alpha=0.5, theta=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
