import numpy as np
import pytest
from scipy.stats import unitary_group

from src.pipeline.graph import GraphInstance
from src.utils.config import GRAPH_DIR


@pytest.fixture
def k2():
    return GraphInstance(n=2, edges=((0, 1),))


@pytest.fixture
def k3():
    return GraphInstance(n=3, edges=((0, 1), (1, 2), (0, 2)))


@pytest.fixture
def c5():
    return GraphInstance(n=5, edges=((0, 1), (1, 2), (2, 3), (3, 4), (0, 4)))


@pytest.fixture
def empty2():
    return GraphInstance(n=2, edges=())


@pytest.fixture
def graph_dir():
    return GRAPH_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_unitary():
    def make(dim, seed=7):
        return unitary_group.rvs(dim, random_state=seed)
    return make


@pytest.fixture
def random_graph():
    def make(rng, n, density=0.5):
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        keep = rng.random(len(pairs)) < density
        return GraphInstance(n=n, edges=tuple(p for p, k in zip(pairs, keep) if k))
    return make
