import numpy as np
import pytest

from graphxplain.datasets import gen_ba
from graphxplain.gcn import TrainConfig, init_gcn, train_target
from graphxplain.graph import Graph


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_graph():
    """Hand-built 8-node graph: a 4-clique bridged to a 4-path."""
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)]
    feats = np.arange(16, dtype=np.float64).reshape(8, 2) / 10.0
    labels = [0, 0, 0, 0, 1, 1, 1, 1]
    return Graph(num_nodes=8, edges=np.array(edges), features=feats, node_labels=labels)


@pytest.fixture(scope="session")
def ba_graph():
    return gen_ba(60, 3, seed=7)


@pytest.fixture(scope="session")
def node_model(ba_graph):
    """Random-init 2-layer node classifier over the BA fixture graph."""
    return init_gcn(ba_graph.feature_dim, 6, 3, num_layers=2, head="node", seed=31)


@pytest.fixture(scope="session")
def graph_model():
    return init_gcn(2, 5, 2, num_layers=2, head="graph", seed=32)


@pytest.fixture(scope="session")
def trained_tiny(tiny_graph):
    """Quickly trained node model on a graph whose labels are separable."""
    g = Graph(
        num_nodes=8,
        edges=tiny_graph.edges,
        features=tiny_graph.features,
        node_labels=tiny_graph.node_labels,
        masks={"train": np.arange(8), "valid": np.arange(8), "test": np.arange(8)},
    )
    model, report = train_target(g, TrainConfig(seed=0, epochs=150))
    return g, model, report
