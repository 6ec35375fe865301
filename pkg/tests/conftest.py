import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def se_mean(x):
    """Standard error of a sample mean."""
    x = np.asarray(x, dtype=float)
    return x.std(ddof=1) / np.sqrt(x.size)
