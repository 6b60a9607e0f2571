import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import reachable
from spdist.graph import (DisconnectedGraphError, Graph, erdos_renyi, is_connected, metropolis_weights,
                          second_singular_value)


def test_edges_normalized_and_deduplicated():
    g = Graph(3, ((1, 0), (0, 1), (2, 1)))
    assert g.edges == ((0, 1), (1, 2))
    assert g.neighbor_sets == ((1,), (0, 2), (1,))
    assert list(g.degrees) == [1, 2, 1]


@pytest.mark.parametrize("edges", [((0, 0),), ((0, 3),), ((-1, 1),)])
def test_bad_edges_rejected(edges):
    with pytest.raises(ValueError):
        Graph(3, edges)


def test_directed_links_cover_both_directions():
    src, dst = Graph.cycle(4).directed_links()
    pairs = set(zip(src.tolist(), dst.tolist()))
    assert len(pairs) == 8
    assert all((j, i) in pairs for i, j in pairs)


def test_erdos_renyi_is_connected_and_deterministic():
    g1 = erdos_renyi(10, 0.3, seed=0)
    g2 = erdos_renyi(10, 0.3, seed=0)
    assert g1 == g2
    assert reachable(g1.adjacency)
    # frozen from the first accepted draw of seed 0
    assert len(g1.edges) == 18
    assert g1.edges[:5] == ((0, 1), (0, 2), (0, 3), (0, 6), (0, 9))


def test_complete_graph_when_p_is_one():
    g = erdos_renyi(6, 1.0, seed=3)
    assert len(g.edges) == 15


def test_p_zero_raises():
    with pytest.raises(DisconnectedGraphError) as info:
        erdos_renyi(5, 0.0, seed=0, max_retries=7)
    assert info.value.attempts == 7


def test_bad_probability():
    with pytest.raises(ValueError):
        erdos_renyi(5, 1.5, seed=0)


def test_metropolis_two_agents():
    W = metropolis_weights(Graph.path(2))
    assert np.allclose(W, [[0.5, 0.5], [0.5, 0.5]])


def test_metropolis_path3_hand_values():
    # degrees (1, 2, 1): w_01 = w_12 = 1/3
    W = metropolis_weights(Graph.path(3))
    expected = np.array([[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])
    assert np.allclose(W, expected, atol=1e-15)


def test_second_singular_value_complete_graph():
    W = np.full((4, 4), 0.25)
    assert second_singular_value(W) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 12), p=st.floats(0.0, 1.0), seed=st.integers(0, 2**32))
def test_connectivity_agrees_with_reachability(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    adj = np.zeros((n, n))
    for i, j in edges:
        adj[i, j] = adj[j, i] = 1
    assert is_connected(n, edges) == reachable(adj)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 10**6))
def test_metropolis_doubly_stochastic_and_symmetric(n, seed):
    g = erdos_renyi(n, 0.5, seed)
    W = metropolis_weights(g)
    assert np.all(W >= 0)
    assert np.allclose(W, W.T, atol=0)
    assert np.allclose(W.sum(axis=0), 1, atol=1e-12)
    assert np.allclose(W.sum(axis=1), 1, atol=1e-12)
    off = (W > 0) & ~np.eye(n, dtype=bool)
    assert np.array_equal(off, g.adjacency > 0)
    assert second_singular_value(W) < 1 - 1e-12
