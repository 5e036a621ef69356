import numpy as np
import pytest

from rgsp.graph_core import random_graph


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def er_graph():
    return random_graph("ER", {"n_nodes": 12, "p": 0.4}, seed=3)


@pytest.fixture
def sbm_graph():
    return random_graph("SBM", {"n_nodes": 16, "n_communities": 2, "p_in": 0.7, "p_out": 0.1}, seed=5)


@pytest.fixture
def path_graph():
    from rgsp.graph_core import build_gso

    return build_gso([(i, i + 1) for i in range(5)])
