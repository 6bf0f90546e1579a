import numpy as np
import pytest
from hypothesis import settings

from twostream import FrequencyParams, SeverityParams, nu_from_frequency

settings.register_profile("repo", max_examples=60, deadline=None)
settings.load_profile("repo")

# Count fit reported for the motor portfolio; used as a realistic anchor.
PORTFOLIO = FrequencyParams(0.5929959, 97.55820446, 30.14706672, 0.01978072)
NU = nu_from_frequency(PORTFOLIO)
FINITE = SeverityParams(NU, 1.0, 2.0, 1.0)
INFINITE = SeverityParams(NU, 1.0, 0.3, 0.5)


@pytest.fixture
def portfolio():
    return PORTFOLIO


@pytest.fixture
def finite_sev():
    return FINITE


@pytest.fixture
def infinite_sev():
    return INFINITE


@pytest.fixture
def small_freq():
    """Low-intensity count model so histories stay small."""
    return FrequencyParams(0.6, 4.0, 3.0, 1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
