import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fourierkan_gcf.graph import InteractionGraph

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_graph(rng, max_users=3, max_items=3, min_edges=1):
    """Random bipartite graph; every user and item may be isolated."""
    while True:
        nu = int(rng.integers(1, max_users + 1))
        ni = int(rng.integers(1, max_items + 1))
        mask = rng.random((nu, ni)) < 0.6
        if mask.sum() >= min_edges:
            u, i = np.nonzero(mask)
            return InteractionGraph.from_edges(nu, ni, u, i, rng.permutation(u.size))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_graph():
    # 5 users, 5 items, 8 edges; every node has at least one edge
    users = [0, 0, 1, 2, 2, 3, 4, 4]
    items = [0, 1, 1, 2, 3, 4, 0, 3]
    return InteractionGraph.from_edges(5, 5, users, items)
