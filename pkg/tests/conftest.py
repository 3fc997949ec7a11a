import numpy as np
import pytest

from ncvaic.glm import BERNOULLI, GAUSSIAN, POISSON, Dataset

FAMILIES = [GAUSSIAN, BERNOULLI, POISSON]


def random_dataset(rng, fam, n=40, p=3, scale=0.5):
    X = rng.uniform(-1, 1, size=(n, p))
    beta = rng.normal(scale=scale, size=p)
    theta = X @ beta
    if fam is GAUSSIAN:
        y = theta + rng.standard_normal(n)
    elif fam is BERNOULLI:
        y = (rng.random(n) < 1 / (1 + np.exp(-theta))).astype(float)
    else:
        y = rng.poisson(np.exp(theta)).astype(float)
    return Dataset(y, X), beta


def central_diff(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out.append((f(x + e) - f(x - e)) / (2 * h))
    return np.array(out)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
