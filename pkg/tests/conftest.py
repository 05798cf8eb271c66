import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sbcoal.model_core import replicate_rng

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng() -> np.random.Generator:
    return replicate_rng(12345, 0)
