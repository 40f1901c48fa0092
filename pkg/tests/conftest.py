import numpy as np
import pytest

from mmrm import scenarios
from mmrm.simulate import generate_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def trial_data():
    gen = scenarios.generator("unstructured", -8.0)
    return generate_dataset(gen, 60, np.random.default_rng(11))
