import networkx as nx
import numpy as np
import pytest

from blockmat import AttributeLayout, BlockSymMatrix
from data_cov import CovEstimate, Dataset, sample_covariance


def random_spd(rng, dim, ridge=0.5):
    a = rng.standard_normal((dim, dim))
    return a @ a.T / dim + ridge * np.eye(dim)


def random_cov(rng, layout, n=None):
    """Sample covariance of n Gaussian draws with a random SPD covariance"""
    n = n or 4 * layout.total_dim
    chol = np.linalg.cholesky(random_spd(rng, layout.total_dim))
    x = rng.standard_normal((n, layout.total_dim)) @ chol.T
    return sample_covariance(Dataset(layout, x))


def chain_precision(p, k, weight=0.2):
    layout = AttributeLayout.uniform(p, k)
    omega = np.eye(layout.total_dim)
    for a in range(p - 1):
        omega[layout.span(a), layout.span(a + 1)] = weight
        omega[layout.span(a + 1), layout.span(a)] = weight
    return BlockSymMatrix(layout, omega)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_cov(rng):
    return random_cov(rng, AttributeLayout.uniform(4, 2))


@pytest.fixture
def tiny_chain():
    """4-node chain 0-1-2-3 with two attributes per node"""
    graph = nx.path_graph(4)
    return graph, chain_precision(4, 2)


@pytest.fixture
def identity_cov():
    layout = AttributeLayout.uniform(2, 1)
    return CovEstimate(BlockSymMatrix.identity(layout), np.full((2, 2), 100))
