import numpy as np
import pytest

from ionrabi import HilbertSpace


@pytest.fixture
def space():
    return HilbertSpace(12)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
