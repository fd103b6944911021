import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from structloewner import first_order, parse_structure, toy_delay

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DELAY = "s,-1,-exp(-1*s)"


@pytest.fixture
def toy():
    """``(model, oracle)`` for H(s) = 1/(s + 2 - 0.5 exp(-s))."""
    return toy_delay(1.0, -2.0, 0.5, 1.0, 1.0)


@pytest.fixture
def first():
    return first_order(1.0)


@pytest.fixture
def delay_structure():
    return parse_structure(DELAY)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1e-300, np.max(np.abs(b))))
