"""Shared helpers for the test suite."""

import numpy as np
import pytest

from provex.fixtures import demo_network, random_network, uniform_instances
from provex.network import predict
from provex.queries import SufficiencyQuery


@pytest.fixture
def demo():
    """The bundled 3-input toy network and its reference instance."""
    return demo_network()


def make_query(net, x, fixed, epsilon):
    """Sufficiency query with the target taken from the network itself."""
    return SufficiencyQuery(
        x=np.asarray(x, dtype=np.float64),
        fixed_features=frozenset(fixed),
        epsilon=epsilon,
        target=predict(net, x),
        domain=net.input_domain,
    )


def small_net_and_instance(seed, input_dim=6, hidden=(10, 8), output_dim=3, activation="relu"):
    """A seeded small network plus one in-domain instance."""
    net = random_network(input_dim, hidden, output_dim, activation, seed=seed)
    x = uniform_instances(net, 1, seed=seed)[0]
    return net, x


def random_subbox(net, rng):
    """A random box inside the network's input domain."""
    lo_d, hi_d = net.input_domain.lo, net.input_domain.hi
    a = rng.uniform(lo_d, hi_d)
    b = rng.uniform(lo_d, hi_d)
    return np.minimum(a, b), np.maximum(a, b)
