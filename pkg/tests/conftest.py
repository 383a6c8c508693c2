import numpy as np
import pytest

from cosetlab.grid import mini_grid, wideband_grid


@pytest.fixture(scope="session")
def wb_grid():
    return wideband_grid()


@pytest.fixture(scope="session")
def small_grid():
    return mini_grid()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_frame(grid, rng):
    n = grid.frame_len
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)
