import numpy as np
import pytest

from mrlbm import d1q3_wave_scheme


@pytest.fixture(scope="session")
def wave_scheme():
    return d1q3_wave_scheme(0.5, 1.0, 1.7)


@pytest.fixture
def rng():
    return np.random.default_rng(20211)
