import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ccmrce", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ccmrce")


def random_spd(q, rng, cond=10.0):
    """Random symmetric positive definite matrix with a bounded condition number."""
    Q, _ = np.linalg.qr(rng.standard_normal((q, q)))
    ev = np.exp(rng.uniform(0.0, np.log(cond), q))
    M = (Q * ev) @ Q.T
    return 0.5 * (M + M.T)


def random_mask(q, rng, density=0.4):
    upper = np.triu(rng.random((q, q)) < density, 1)
    return upper | upper.T | np.eye(q, dtype=bool)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
