import networkx as nx
import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from errors import InputError
from simgen import (build_precision, chain_graph, gen_chain, gen_nearest_neighbor, generate,
                    hamming_distance, nearest_neighbor_graph, theta_to_n)


def test_chain_graph_shape():
    graph = chain_graph(20, seed=1)
    assert graph.number_of_edges() == 19
    assert max(d for _, d in graph.degree()) == 2
    assert nx.is_connected(graph)


def test_chain_graph_has_one_chain_per_component():
    graph = chain_graph(60, seed=1)
    assert graph.number_of_edges() == 57
    assert nx.number_connected_components(graph) == 3
    for nodes in nx.connected_components(graph):
        assert sorted(nodes)[0] % 20 == 0
        assert max(nodes) - min(nodes) == 19


def test_nearest_neighbor_degree_cap():
    for seed in range(5):
        graph = nearest_neighbor_graph(40, seed)
        assert max(d for _, d in graph.degree()) <= 4
        assert graph.number_of_edges() > 0
        for a, b in graph.edges():
            assert a // 20 == b // 20


def test_generators_are_deterministic():
    a = gen_nearest_neighbor(20, 2, seed=7, regime="uniform-random")
    b = gen_nearest_neighbor(20, 2, seed=7, regime="uniform-random")
    assert np.array_equal(a.precision.data, b.precision.data)
    assert set(a.graph.edges()) == set(b.graph.edges())
    c = gen_chain(20, 2, seed=8)
    assert set(c.graph.edges()) != set(gen_chain(20, 2, seed=9).graph.edges())


def test_diagonal_blocks_are_shifted_toeplitz():
    truth = gen_chain(20, 3, seed=0)
    toeplitz = scipy.linalg.toeplitz([1.0, 0.5, 0.25])
    shift = truth.precision.block(0, 0) - toeplitz
    assert_allclose(shift, shift[0, 0] * np.eye(3), atol=1e-12)
    for a in range(1, 20):
        assert_allclose(truth.precision.block(a, a), truth.precision.block(0, 0))


@pytest.mark.parametrize("regime", ["full", "diagonal", "zero-diagonal", "uniform-random"])
@pytest.mark.parametrize("kind", ["chain", "nn"])
def test_min_eigenvalue_is_half(regime, kind):
    truth = generate(kind, 20, 2, seed=3, regime=regime)
    assert scipy.linalg.eigvalsh(truth.precision.data)[0] == pytest.approx(0.5, abs=1e-8)
    assert np.array_equal(truth.precision.data, truth.precision.data.T)


def test_edge_blocks_follow_regime():
    full = gen_chain(20, 2, seed=0)
    a, b = sorted(next(iter(full.graph.edges())))
    assert_allclose(full.precision.block(a, b), np.full((2, 2), 0.2))
    diag = gen_chain(20, 2, seed=0, regime="diagonal")
    assert_allclose(diag.precision.block(a, b), 0.2 * np.eye(2))
    nn = gen_nearest_neighbor(20, 3, seed=0)
    a, b = sorted(next(iter(nn.graph.edges())))
    assert_allclose(nn.precision.block(a, b), np.full((3, 3), 0.1))
    uniform = gen_chain(20, 2, seed=0, regime="uniform-random")
    a, b = sorted(next(iter(uniform.graph.edges())))
    values = np.abs(uniform.precision.block(a, b))
    assert np.all((values >= 0.1) & (values <= 0.3))


def test_zero_diagonal_with_one_attribute_is_degenerate():
    truth = gen_chain(20, 1, seed=0, regime="zero-diagonal")
    assert truth.degenerate
    assert truth.graph.number_of_edges() == 0
    assert truth.design_graph.number_of_edges() == 19


def test_unknown_regime_and_kind():
    with pytest.raises(InputError):
        gen_chain(20, 2, seed=0, regime="banded")
    with pytest.raises(InputError):
        generate("grid", 20, 2, seed=0)
    with pytest.raises(InputError):
        build_precision(nx.path_graph(3), 2, kind="star")


def test_p_must_be_multiple_of_component_size():
    with pytest.raises(InputError):
        gen_chain(30, 2, seed=0)
    assert gen_chain(10, 2, seed=0).graph.number_of_edges() == 9


def test_theta_to_n():
    assert theta_to_n(13, 2, 3, 20) == 1917
    assert theta_to_n(0, 2, 3, 20) == 0
    with pytest.raises(InputError):
        theta_to_n(-1, 2, 3, 20)


def test_hamming_distance():
    truth = gen_chain(20, 1, seed=0).graph
    empty = nx.empty_graph(20)
    assert hamming_distance(truth, truth.copy()) == 0
    assert hamming_distance(truth, empty) == 19
    moved = truth.copy()
    a, b = next(iter(moved.edges()))
    moved.remove_edge(a, b)
    non_edge = next(e for e in nx.non_edges(truth))
    moved.add_edge(*non_edge)
    assert hamming_distance(truth, moved) == 2
    with pytest.raises(InputError):
        hamming_distance(truth, nx.empty_graph(19))
