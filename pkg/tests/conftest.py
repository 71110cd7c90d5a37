import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_mask(rng, height, width, density=0.5):
    return rng.random((height, width)) < density
