import math
import os
import sys

import pytest

# Add the repository root to sys.path so "spiraldrive.x" imports work from any cwd
repo_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if repo_root not in sys.path:
    sys.path.append(repo_root)

from spiraldrive.engine.spin_core import DriveSystem, exact_cancellation_amplitude

TILT = math.radians(35.3)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end reference checks that take tens of seconds")


@pytest.fixture
def tilted_system():
    """Wd = w0 at the 35.3 degree drive tilt."""
    return DriveSystem(omega0=1.0, omega_d=1.0, theta_d=TILT)


@pytest.fixture
def cancellation_system():
    """Drive amplitude at which f = -1 cancels the splitting exactly."""
    return DriveSystem(omega0=1.0, omega_d=exact_cancellation_amplitude(1.0, TILT), theta_d=TILT)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240611)
