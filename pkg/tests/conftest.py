import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hemsopt.config import load_reference_instance

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def ref_day():
    return load_reference_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
