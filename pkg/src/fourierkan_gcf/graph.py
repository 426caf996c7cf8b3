"""Bipartite interaction graph, symmetric normalization and node dropout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grad import ContractError, SparseMatrix


@dataclass(frozen=True)
class InteractionGraph:
    """Deduplicated user-item edges with integer timestamps.

    Use :meth:`from_edges` to build one from raw (possibly repeated) edges;
    the first occurrence of a (user, item) pair keeps its timestamp.
    """

    num_users: int
    num_items: int
    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        for name in ("users", "items", "timestamps"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if not (self.users.shape == self.items.shape == self.timestamps.shape):
            raise ContractError("edge arrays must have equal length")
        if self.users.size:
            if self.users.min() < 0 or self.users.max() >= self.num_users:
                raise ContractError("user index out of range")
            if self.items.min() < 0 or self.items.max() >= self.num_items:
                raise ContractError("item index out of range")
        codes = self.users * self.num_items + self.items
        if np.unique(codes).size != codes.size:
            raise ContractError("duplicate (user, item) edges; build with from_edges")

    @classmethod
    def from_edges(cls, num_users: int, num_items: int, users, items, timestamps=None):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if timestamps is None:
            timestamps = np.arange(users.size, dtype=np.int64)
        timestamps = np.asarray(timestamps, dtype=np.int64)
        codes = users * num_items + items
        _, first = np.unique(codes, return_index=True)
        keep = np.sort(first)
        return cls(num_users, num_items, users[keep], items[keep], timestamps[keep])

    @property
    def num_edges(self) -> int:
        return int(self.users.size)

    def subgraph(self, mask) -> "InteractionGraph":
        """Edges selected by a boolean mask or index array, same node space."""
        return InteractionGraph(
            self.num_users, self.num_items, self.users[mask], self.items[mask], self.timestamps[mask]
        )

    def user_degrees(self) -> np.ndarray:
        return np.bincount(self.users, minlength=self.num_users)

    def item_degrees(self) -> np.ndarray:
        return np.bincount(self.items, minlength=self.num_items)

    def user_item_sets(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in range(self.num_users)]
        for u, i in zip(self.users.tolist(), self.items.tolist()):
            out[u].add(i)
        return out


def degree(g: InteractionGraph, node: int, side: str = "user") -> int:
    """Number of edges incident to ``node`` on the given side."""
    if side == "user":
        n, ends = g.num_users, g.users
    elif side == "item":
        n, ends = g.num_items, g.items
    else:
        raise ContractError(f"side must be 'user' or 'item', got {side!r}")
    if not 0 <= node < n:
        raise ContractError(f"{side} index {node} out of range [0, {n})")
    return int(np.count_nonzero(ends == node))


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Both directions of the 1/sqrt(|N_u| |N_i|) weighted bipartite operator.

    Edges are kept in user-major order: edge ``e`` connects
    ``edge_users[e]`` and ``edge_items[e]`` and its weight is
    ``user_item.values[e]``. ``item_user.values[k]`` belongs to edge
    ``item_order[k]``.
    """

    user_item: SparseMatrix
    item_user: SparseMatrix
    edge_users: np.ndarray
    edge_items: np.ndarray
    item_order: np.ndarray

    @property
    def num_users(self) -> int:
        return self.user_item.rows

    @property
    def num_items(self) -> int:
        return self.user_item.cols

    @property
    def num_edges(self) -> int:
        return self.user_item.nnz

    @property
    def edge_weights(self) -> np.ndarray:
        return self.user_item.values

    def with_edge_weights(self, weights) -> "NormalizedAdjacency":
        weights = np.asarray(weights, dtype=np.float64)
        return NormalizedAdjacency(
            self.user_item.with_values(weights),
            self.item_user.with_values(weights[self.item_order]),
            self.edge_users,
            self.edge_items,
            self.item_order,
        )

    def edge_scatter(self, user_weights=None, item_weights=None) -> tuple[SparseMatrix, SparseMatrix]:
        """Operators summing per-edge rows into users (U x E) and items (I x E).

        Weights default to the normalized edge weights.
        """
        w = self.edge_weights
        uw = w if user_weights is None else np.asarray(user_weights, dtype=np.float64)
        iw = w if item_weights is None else np.asarray(item_weights, dtype=np.float64)
        e = np.arange(self.num_edges)
        to_users = SparseMatrix(self.num_users, self.num_edges, self.user_item.indptr, e, uw)
        to_items = SparseMatrix(
            self.num_items, self.num_edges, self.item_user.indptr, self.item_order, iw[self.item_order]
        )
        return to_users, to_items


def build_normalized_adjacency(g: InteractionGraph) -> NormalizedAdjacency:
    if g.num_edges == 0:
        raise ContractError("cannot normalize an empty graph")
    du = g.user_degrees().astype(np.float64)
    di = g.item_degrees().astype(np.float64)
    order = np.lexsort((g.items, g.users))
    eu, ei = g.users[order], g.items[order]
    w = 1.0 / np.sqrt(du[eu] * di[ei])

    ui_ptr = np.concatenate([[0], np.cumsum(np.bincount(eu, minlength=g.num_users))])
    user_item = SparseMatrix(g.num_users, g.num_items, ui_ptr, ei, w)

    item_order = np.lexsort((eu, ei))
    iu_ptr = np.concatenate([[0], np.cumsum(np.bincount(ei, minlength=g.num_items))])
    item_user = SparseMatrix(g.num_items, g.num_users, iu_ptr, eu[item_order], w[item_order])
    return NormalizedAdjacency(user_item, item_user, eu, ei, item_order)


def node_dropout(adj: NormalizedAdjacency, p_n: float, rng_seed) -> NormalizedAdjacency:
    """Zero every edge incident to a random ``p_n`` fraction of all nodes.

    Users and items are pooled; ``round(p_n * (U + I))`` nodes are chosen
    without replacement. Surviving weights are not rescaled.
    """
    if not 0.0 <= p_n < 1.0:
        raise ContractError(f"node dropout ratio must lie in [0, 1), got {p_n}")
    if p_n == 0.0:
        return adj
    n_nodes = adj.num_users + adj.num_items
    n_drop = int(round(p_n * n_nodes))
    rng = np.random.default_rng(rng_seed)
    dropped = np.zeros(n_nodes, dtype=bool)
    dropped[rng.choice(n_nodes, size=n_drop, replace=False)] = True
    hit = dropped[adj.edge_users] | dropped[adj.num_users + adj.edge_items]
    return adj.with_edge_weights(np.where(hit, 0.0, adj.edge_weights))
