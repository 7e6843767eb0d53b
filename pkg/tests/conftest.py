import os

import numpy as np
import pytest
import scipy.sparse as sp

from gembed.graph import Graph, IdMap

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def karate_path() -> str:
    return os.path.join(DATA_DIR, "karate.edgelist")


@pytest.fixture(scope="session")
def karate_labels_path() -> str:
    return os.path.join(DATA_DIR, "karate.labels")


def random_graph(n: int, p: float, seed: int, directed: bool = False,
                 weighted: bool = False) -> Graph:
    """Erdos-Renyi-style graph over dense ids 0..n-1."""
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                w = rng.uniform(0.5, 3.0) if weighted else 1.0
                edges.append((i, j, w))
    return Graph.from_edges(edges, directed=directed, weighted=weighted,
                            id_map=IdMap.identity(n), node_count=n)


def block_graph(sizes, p_in: float, p_out: float, seed: int,
                noise_dims: int = 13, noise: float = 1.0):
    """Planted-partition graph with noisy block-indicator attributes."""
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    block = np.repeat(np.arange(len(sizes)), sizes)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if block[i] == block[j] else p_out
            if rng.random() < p:
                edges.append((i, j))
    g = Graph.from_edges(edges, directed=False, id_map=IdMap.identity(n),
                         node_count=n)
    X = np.hstack([np.eye(len(sizes))[block],
                   rng.normal(0, noise, (n, noise_dims))])
    return g.with_attributes(sp.csr_matrix(X)), block
