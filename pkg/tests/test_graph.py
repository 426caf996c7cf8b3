import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourierkan_gcf.grad import ContractError
from fourierkan_gcf.graph import (
    InteractionGraph,
    build_normalized_adjacency,
    degree,
    node_dropout,
)

from conftest import random_graph


def test_single_edge_weight():
    adj = build_normalized_adjacency(InteractionGraph.from_edges(1, 1, [0], [0]))
    assert adj.user_item.to_dense().tolist() == [[1.0]]
    assert adj.item_user.to_dense().tolist() == [[1.0]]


def test_star_user_weights():
    adj = build_normalized_adjacency(InteractionGraph.from_edges(1, 4, [0] * 4, range(4)))
    assert adj.user_item.values.tolist() == [0.5] * 4


def test_complete_bipartite_weights_and_row_sums():
    g = InteractionGraph.from_edges(2, 2, [0, 0, 1, 1], [0, 1, 0, 1])
    adj = build_normalized_adjacency(g)
    assert adj.user_item.values.tolist() == [0.5] * 4
    np.testing.assert_array_equal(adj.user_item.to_dense().sum(axis=1), [1.0, 1.0])


def test_empty_graph_rejected():
    with pytest.raises(ContractError):
        build_normalized_adjacency(InteractionGraph.from_edges(2, 2, [], []))


def test_degree():
    g = InteractionGraph.from_edges(2, 4, [0, 0, 0], [0, 1, 2])
    assert degree(g, 0) == 3
    assert degree(g, 3, side="item") == 0
    with pytest.raises(ContractError):
        degree(g, 2)


def test_duplicate_edges_collapse_keeping_first_timestamp():
    g = InteractionGraph.from_edges(1, 2, [0, 0, 0], [1, 1, 0], [5, 3, 9])
    assert g.num_edges == 2
    assert degree(g, 1, side="item") == 1
    assert g.timestamps[list(g.items).index(1)] == 5


def test_graph_validates_ranges():
    with pytest.raises(ContractError):
        InteractionGraph(1, 1, [0], [1], [0])
    with pytest.raises(ContractError):
        InteractionGraph(1, 1, [0, 0], [0, 0], [0, 1])


@given(st.integers(0, 2**31))
def test_normalized_weights_and_transpose_symmetry(seed):
    g = random_graph(np.random.default_rng(seed), 6, 6)
    adj = build_normalized_adjacency(g)
    du, di = g.user_degrees(), g.item_degrees()
    dense = adj.user_item.to_dense()
    expected = np.zeros_like(dense)
    for u, i in zip(g.users, g.items):
        expected[u, i] = 1.0 / math.sqrt(du[u] * di[i])
    np.testing.assert_array_equal(dense, expected)
    np.testing.assert_array_equal(adj.item_user.to_dense(), dense.T)
    # row-sum bound
    bound = np.sqrt(du) * np.max(1.0 / np.sqrt(np.maximum(di, 1)))
    assert np.all(dense.sum(axis=1) <= bound + 1e-12)


@given(st.integers(0, 2**31))
def test_edge_scatter_matches_adjacency(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 5, 5)
    adj = build_normalized_adjacency(g)
    X = rng.normal(size=(adj.num_items, 3))
    to_users, to_items = adj.edge_scatter()
    gathered_items = X[adj.edge_items]
    np.testing.assert_allclose(to_users.to_dense() @ gathered_items, adj.user_item.to_dense() @ X, atol=1e-12)
    Y = rng.normal(size=(adj.num_users, 3))
    np.testing.assert_allclose(
        to_items.to_dense() @ Y[adj.edge_users], adj.item_user.to_dense() @ Y, atol=1e-12
    )


def test_node_dropout_zero_is_identity(tiny_graph):
    adj = build_normalized_adjacency(tiny_graph)
    out = node_dropout(adj, 0.0, 1)
    np.testing.assert_array_equal(out.user_item.values, adj.user_item.values)


def test_node_dropout_of_only_user_clears_everything():
    g = InteractionGraph.from_edges(1, 1, [0], [0])
    adj = build_normalized_adjacency(g)
    # 2 nodes, p=0.5 drops exactly one; either choice isolates the only edge
    out = node_dropout(adj, 0.5, 0)
    assert not out.user_item.values.any() and not out.item_user.values.any()


def test_node_dropout_quarter_of_four_nodes():
    g = InteractionGraph.from_edges(2, 2, [0, 0, 1, 1], [0, 1, 0, 1])
    adj = build_normalized_adjacency(g)
    for seed in range(10):
        dense = node_dropout(adj, 0.25, seed).user_item.to_dense()
        dead_rows = np.flatnonzero(~dense.any(axis=1))
        dead_cols = np.flatnonzero(~dense.any(axis=0))
        assert len(dead_rows) + len(dead_cols) == 1
        assert np.count_nonzero(dense) == 2


def test_node_dropout_reproducible_and_unscaled(tiny_graph):
    adj = build_normalized_adjacency(tiny_graph)
    a = node_dropout(adj, 0.3, 42)
    b = node_dropout(adj, 0.3, 42)
    assert np.array_equal(a.user_item.values, b.user_item.values)
    kept = a.user_item.values != 0
    np.testing.assert_array_equal(a.user_item.values[kept], adj.user_item.values[kept])
    np.testing.assert_array_equal(a.item_user.to_dense(), a.user_item.to_dense().T)


@pytest.mark.parametrize("p", [-0.1, 1.0, 1.5])
def test_node_dropout_rejects_bad_ratio(tiny_graph, p):
    with pytest.raises(ContractError):
        node_dropout(build_normalized_adjacency(tiny_graph), p, 0)
