import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wpmelab import ProblemParams, WeightSpec, make_grid

settings.register_profile(
    "wpme", max_examples=30, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("wpme")


@pytest.fixture
def params():
    """N=3, gamma=1, m=2: the configuration with an explicit solution."""
    return ProblemParams(3, 2.0, WeightSpec(1.0))


@pytest.fixture
def grid(params):
    return make_grid(50.0, 200, N=3, weight=params.weight)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
