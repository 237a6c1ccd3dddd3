"""
Synthetic ground truths: chain and nearest-neighbour graphs, block precision
matrices in four off-diagonal regimes, and recovery scoring
"""
import logging
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

import config
from blockmat import AttributeLayout, BlockSymMatrix
from errors import InputError
from solver import graph_from_precision

logger = logging.getLogger(__name__)

REGIMES = ("full", "diagonal", "zero-diagonal", "uniform-random")
KINDS = ("chain", "nn")
MAX_DEGREE = {"chain": 2, "nn": 4}


@dataclass
class GroundTruth:
    graph: nx.Graph
    precision: BlockSymMatrix
    layout: AttributeLayout
    regime: str
    seed: int
    kind: str
    design_graph: nx.Graph
    degenerate: bool = False

    @property
    def s(self):
        return MAX_DEGREE[self.kind]

    @property
    def covariance(self):
        return BlockSymMatrix(self.layout, np.linalg.inv(self.precision.data))


# ============================================
# GRAPHS
# ============================================

def _components(p):
    size = config.COMPONENT_SIZE
    if p < 1:
        raise InputError("need at least one node")
    if p <= size:
        return [np.arange(p)]
    if p % size:
        raise InputError(f"p={p} must be a multiple of {size}")
    return [np.arange(c, c + size) for c in range(0, p, size)]


def chain_graph(p, seed):
    rng = np.random.default_rng(seed)
    graph = nx.Graph()
    graph.add_nodes_from(range(p))
    for nodes in _components(p):
        order = rng.permutation(nodes)
        graph.add_edges_from(zip(order[:-1].tolist(), order[1:].tolist()))
    return graph


def nearest_neighbor_graph(p, seed, s=4):
    """
    Join each node to its s closest points on the unit square, then cap degrees at s

    Distance ties go to the lower node index. Removal repeatedly picks, uniformly
    at random, one edge from the lexicographically sorted list of edges touching
    a node with degree above s.
    """
    rng = np.random.default_rng(seed)
    graph = nx.Graph()
    graph.add_nodes_from(range(p))
    for nodes in _components(p):
        m = len(nodes)
        points = rng.uniform(size=(m, 2))
        dist = cdist(points, points)
        reach = min(s, m - 1)
        for i in range(m):
            order = np.lexsort((np.arange(m), dist[i]))
            neighbours = [j for j in order if j != i][:reach]
            graph.add_edges_from((int(nodes[i]), int(nodes[j])) for j in neighbours)

    while True:
        over = {n for n, deg in graph.degree() if deg > s}
        if not over:
            break
        candidates = sorted(tuple(sorted(e)) for e in graph.edges() if e[0] in over or e[1] in over)
        graph.remove_edge(*candidates[rng.integers(len(candidates))])
    return graph


# ============================================
# PRECISION MATRICES
# ============================================

def _offdiag_block(regime, k, value, rng):
    if regime == "full":
        return np.full((k, k), value)
    if regime == "diagonal":
        return value * np.eye(k)
    if regime == "zero-diagonal":
        return value * (np.ones((k, k)) - np.eye(k))
    if regime == "uniform-random":
        return rng.uniform(0.1, 0.3, size=(k, k)) * rng.choice([-1.0, 1.0], size=(k, k))
    raise InputError(f"unknown regime '{regime}', expected one of {REGIMES}")


def build_precision(graph, k, regime="full", seed=0, kind="chain"):
    """
    Toeplitz 0.5^|i-j| diagonal blocks, regime-shaped blocks on edges, then a
    rho*I shift putting the smallest eigenvalue at exactly 0.5
    """
    if kind not in KINDS:
        raise InputError(f"unknown graph kind '{kind}', expected one of {KINDS}")
    rng = np.random.default_rng(seed)
    p = graph.number_of_nodes()
    layout = AttributeLayout.uniform(p, k)
    value = 0.2 if kind == "chain" else 0.3 / k
    omega = np.zeros((layout.total_dim, layout.total_dim))
    diag = scipy.linalg.toeplitz(0.5 ** np.arange(k))
    for a in range(p):
        omega[layout.span(a), layout.span(a)] = diag
    for a, b in sorted(tuple(sorted(e)) for e in graph.edges()):
        block = _offdiag_block(regime, k, value, rng)
        omega[layout.span(a), layout.span(b)] = block
        omega[layout.span(b), layout.span(a)] = block.T
    rho = config.TARGET_MIN_EIGENVALUE - scipy.linalg.eigvalsh(omega)[0]
    omega += rho * np.eye(layout.total_dim)
    precision = BlockSymMatrix(layout, omega)

    effective = graph_from_precision(precision)
    degenerate = effective.number_of_edges() != graph.number_of_edges()
    if degenerate:
        logger.warning("regime %s with k=%d zeroes edge blocks; truth graph is degenerate",
                       regime, k)
    return GroundTruth(effective, precision, layout, regime, seed, kind,
                       design_graph=graph, degenerate=degenerate)


def gen_chain(p, k, seed, regime="full"):
    if k < 1:
        raise InputError("need at least one attribute per node")
    return build_precision(chain_graph(p, seed), k, regime, seed, kind="chain")


def gen_nearest_neighbor(p, k, seed, regime="full"):
    if k < 1:
        raise InputError("need at least one attribute per node")
    return build_precision(nearest_neighbor_graph(p, seed), k, regime, seed, kind="nn")


def generate(kind, p, k, seed, regime="full"):
    if kind == "chain":
        return gen_chain(p, k, seed, regime)
    if kind == "nn":
        return gen_nearest_neighbor(p, k, seed, regime)
    raise InputError(f"unknown graph kind '{kind}', expected one of {KINDS}")


# ============================================
# SAMPLE SIZE AND SCORING
# ============================================

def theta_to_n(theta, s, k, p):
    """n = ceil(theta * s^2 * k^2 * log(p k))"""
    if theta < 0 or s < 1 or k < 1 or p < 1:
        raise InputError("theta_to_n needs theta >= 0 and positive s, k, p")
    return int(math.ceil(theta * s * s * k * k * math.log(p * k)))


def _edge_set(graph):
    return {tuple(sorted(e)) for e in graph.edges()}


def hamming_distance(g1, g2):
    """Number of node pairs whose edge indicator differs"""
    if g1.number_of_nodes() != g2.number_of_nodes():
        raise InputError("graphs have different node counts",
                         nodes=[g1.number_of_nodes(), g2.number_of_nodes()])
    return len(_edge_set(g1) ^ _edge_set(g2))
