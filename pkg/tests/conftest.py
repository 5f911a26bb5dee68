import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlkg_inverse import Grid2D, StateH, TimeWindow, gaussian_state

settings.register_profile(
    "ci",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def grid():
    return Grid2D(16, 16.0)


@pytest.fixture(scope="session")
def window():
    return TimeWindow(4.0, 16)


@pytest.fixture(scope="session")
def probe(grid):
    return gaussian_state(grid, amplitude=1.0)


def random_state_from_seed(grid, seed, with_velocity=True):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(grid.shape)
    g = rng.standard_normal(grid.shape) if with_velocity else np.zeros(grid.shape)
    return StateH(grid, f, g)
