import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("rmtlab", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rmtlab")

# acceptance helpers read this; a single worker keeps test runs reproducible on small machines
os.environ.setdefault("RMTLAB_WORKERS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
