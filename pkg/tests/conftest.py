import numpy as np
import pytest

from lpgnn_lab.graph import Dataset, Graph


def make_dataset(graph, d=2, num_classes=2, features=None, labels=None, seed=0):
    """Small dataset over ``graph`` with a round-robin train/val/test split."""
    n = graph.num_nodes
    rng = np.random.default_rng(seed)
    if features is None:
        features = rng.integers(0, 2, size=(n, d)).astype(float)
    if labels is None:
        labels = np.arange(n) % num_classes
    ids = np.arange(n)
    return Dataset(
        graph,
        np.asarray(features, dtype=float),
        np.asarray(labels, dtype=np.int64),
        ids % 3 == 0,
        ids % 3 == 1,
        ids % 3 == 2,
        num_classes,
    )


@pytest.fixture
def path3():
    return Graph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def star6():
    return Graph.from_edges(6, [(0, i) for i in range(1, 6)])


@pytest.fixture
def path4():
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
