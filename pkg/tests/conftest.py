import numpy as np
import pytest


@pytest.fixture
def nprng():
    """Independent numpy generator for building test instances."""
    return np.random.default_rng(20260810)


def random_spd(rng, p, jitter=0.1):
    """Random symmetric positive definite matrix."""
    m = rng.standard_normal((p, p))
    return m @ m.T + jitter * np.eye(p)
