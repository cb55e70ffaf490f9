import numpy as np
import pytest

from freeza.topology import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sq5():
    return GridSpec("sq", 5)
