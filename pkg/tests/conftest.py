import numpy as np
import pytest

from bvaukf.kinematics import Anthropometrics

# filled by tests/test_acceptance.py, one line per criterion
ACCEPTANCE_LINES = {}


@pytest.fixture
def anthro():
    return Anthropometrics()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_angles(rng, n, margin=0.2):
    """Joint angles kept ``margin`` away from the poles."""
    phi = rng.uniform(margin, np.pi - margin, size=(n, 2))
    theta = rng.uniform(-np.pi, np.pi, size=(n, 2))
    return np.stack([phi[:, 0], theta[:, 0], phi[:, 1], theta[:, 1]], axis=1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
