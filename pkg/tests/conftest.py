import numpy as np
import pytest

from toaloc.hierarchy import assign_levels
from toaloc.scenarios import static9


@pytest.fixture(scope="session")
def sc9():
    return static9()


@pytest.fixture(scope="session")
def lm9(sc9):
    return assign_levels(sc9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
