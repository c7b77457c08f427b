import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(d, gen):
    v = gen.normal(size=d) + 1j * gen.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(d, gen, rank=None):
    rank = rank or d
    a = gen.normal(size=(d, rank)) + 1j * gen.normal(size=(d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
