import numpy as np
import pytest

from fshnnlib.core.trajectory import TrajectoryDataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def linear_dataset():
    """Two trajectories z_n = n * c, five frames, dt = 0.5."""
    c = np.array([1.0, -2.0])
    frames = np.arange(5)[:, None] * c
    states = np.stack([frames, frames + 3.0])
    return TrajectoryDataset(states=states, dt=0.5, system="linear")


def central_difference(f, x, h=1.0e-5):
    """Central finite-difference gradient of a scalar function of a flat array."""
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        out.flat[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return out


@pytest.fixture
def finite_difference():
    return central_difference
