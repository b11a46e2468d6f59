import numpy as np
import pytest

from ctgibbs.geometry import FanBeamGeometry


def small_geometry(N):
    return FanBeamGeometry.reference(N)


@pytest.fixture
def rng():
    return np.random.default_rng(20240)


@pytest.fixture
def geom8():
    return small_geometry(8)


@pytest.fixture
def toy6():
    """6 x 6 image, 4 views: small enough for dense linear algebra."""
    from ctgibbs.phantoms import grains_phantom, simulate_sinogram

    geom = small_geometry(6)
    angles = np.deg2rad([0.0, 45.0, 90.0, 135.0])
    x = np.zeros(36)
    X = x.reshape(6, 6, order="F")
    X[1:4, 2:5] = 1.0
    X[3:5, 1:3] = 0.5
    truth = simulate_sinogram(X.ravel(order="F"), angles, 0.02, geom, seed=3)
    return geom, angles, truth


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LOG: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LOG):
        terminalreporter.write_line(ACCEPTANCE_LOG[k])
