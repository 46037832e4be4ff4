import numpy as np
import pytest

from networks.model import Evidence, Network, ancestral_sample


def random_bipartite(kind, n1, m, rng, scale=1.0, priors=None):
    """Random two-level network with Gaussian (sigmoid) or exponential (noisy-OR) weights."""
    if kind == "sigmoid":
        theta = rng.normal(0.0, scale, size=(n1, m))
    else:
        theta = rng.exponential(scale, size=(n1, m))
    if priors is None:
        priors = rng.uniform(0.1, 0.9, size=m)
    return Network.bipartite(kind, theta, priors)


def sampled_evidence(net, rng):
    return Evidence.from_state(ancestral_sample(net, rng), net.l1)


def small_dag(kind="sigmoid"):
    """0 -> 2, 1 -> 2, 2 -> 3, 1 -> 3, 0 -> 4: five nodes with a non-bipartite edge."""
    edges = [(2, 0, 0.7), (2, 1, 1.3), (3, 2, 0.4), (3, 1, 0.9), (4, 0, 2.0)]
    if kind == "sigmoid":
        edges[2] = (3, 2, -0.4)
    return Network(kind, 5, edges, {0: 0.3, 1: 0.6})


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def sigmoid_net(rng):
    return random_bipartite("sigmoid", 4, 3, rng)


@pytest.fixture
def noisy_or_net(rng):
    return random_bipartite("noisy_or", 4, 3, rng, scale=0.8)
