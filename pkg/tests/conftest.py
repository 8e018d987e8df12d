import numpy as np
import pytest

import specfield as sf


@pytest.fixture(scope="session")
def default_grid():
    return sf.dyadic_frequency_grid()


@pytest.fixture(scope="session")
def grid_2d():
    # trimmed range keeps 2-d node counts reasonable for unit tests
    return sf.dyadic_frequency_grid(dimension=2, j_lo=-14, j_hi=14)


@pytest.fixture(scope="session")
def space_8():
    return sf.uniform_spatial_grid(1, 8)


@pytest.fixture(scope="session")
def brownian():
    return sf.brownian_density()


@pytest.fixture(scope="session")
def fbm_pair():
    """The perturbed/base pair used throughout: f_x <= f_y pointwise."""
    base = sf.fractional_brownian_density(0.5)
    perturbed = sf.PerturbedDensity(
        base, sf.SineModulation(offset=2.0, amplitude=1.0, scale=3.0))
    return perturbed, base


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
