import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


def random_correlation(n, rng, rank=None):
    """Pearson matrix of a random Gaussian panel; ``rank`` sets T = rank + 1."""
    t = (rank + 1) if rank else 3 * n
    x = rng.standard_normal((n, t))
    z = x - x.mean(axis=1, keepdims=True)
    z /= np.sqrt((z * z).mean(axis=1, keepdims=True))
    c = z @ z.T / t
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
