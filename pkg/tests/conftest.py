import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("crimescope", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("crimescope")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
