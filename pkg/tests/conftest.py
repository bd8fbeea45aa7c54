import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("hjlab", max_examples=40, deadline=None)
settings.load_profile("hjlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
