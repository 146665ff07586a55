import numpy as np
import pytest

from vciedit.schedule import build_schedule


@pytest.fixture
def tiny():
    """T=3 linear schedule with betas 0.1, 0.2, 0.3."""
    return build_schedule("linear", 3, 0.1, 0.3)


@pytest.fixture
def linear1000():
    return build_schedule("linear", 1000, 1e-4, 0.02)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))
