"""Interaction files, dataset statistics and the synthetic block dataset.

File format: UTF-8 text, one ``user<delim>item<delim>timestamp`` record per
line, ``#`` lines ignored. Timestamps are non-negative integers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grad import ContractError
from .graph import InteractionGraph


class RawInteraction(NamedTuple):
    user: str
    item: str
    timestamp: int


class InteractionFormatError(ValueError):
    """A line of an interaction file could not be parsed."""

    def __init__(self, path, lineno: int, reason: str):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.lineno = lineno


@dataclass(frozen=True)
class InteractionFormat:
    delimiter: str = "\t"
    header: bool = False
    user_col: int = 0
    item_col: int = 1
    time_col: int = 2
    min_user_interactions: int = 0


@dataclass
class LoadedDataset:
    graph: InteractionGraph
    user_keys: list[str]
    item_keys: list[str]

    @property
    def user_index(self) -> dict[str, int]:
        return {k: i for i, k in enumerate(self.user_keys)}

    @property
    def item_index(self) -> dict[str, int]:
        return {k: i for i, k in enumerate(self.item_keys)}


def read_raw(path, fmt: InteractionFormat = InteractionFormat()) -> list[RawInteraction]:
    out: list[RawInteraction] = []
    need = max(fmt.user_col, fmt.item_col, fmt.time_col) + 1
    with open(path, encoding="utf-8") as fh:
        skipped_header = not fmt.header
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if not skipped_header:
                skipped_header = True
                continue
            parts = line.split(fmt.delimiter)
            if len(parts) < need:
                raise InteractionFormatError(path, lineno, f"expected {need} fields, got {len(parts)}")
            try:
                ts = int(parts[fmt.time_col])
            except ValueError:
                raise InteractionFormatError(
                    path, lineno, f"timestamp {parts[fmt.time_col]!r} is not an integer"
                ) from None
            if ts < 0:
                raise InteractionFormatError(path, lineno, "negative timestamp")
            user, item = parts[fmt.user_col].strip(), parts[fmt.item_col].strip()
            if not user or not item:
                raise InteractionFormatError(path, lineno, "empty user or item key")
            out.append(RawInteraction(user, item, ts))
    return out


def load_interactions(path, fmt: InteractionFormat = InteractionFormat()) -> LoadedDataset:
    """Parse a file into a deduplicated graph with first-appearance indices.

    A repeated (user, item) pair keeps its earliest timestamp.
    """
    raw = read_raw(path, fmt)
    if not raw:
        raise ContractError(f"{path}: no interactions")
    if fmt.min_user_interactions > 1:
        counts: dict[str, set[str]] = {}
        for r in raw:
            counts.setdefault(r.user, set()).add(r.item)
        raw = [r for r in raw if len(counts[r.user]) >= fmt.min_user_interactions]
        if not raw:
            raise ContractError(f"{path}: no users left after the interaction filter")

    user_ids: dict[str, int] = {}
    item_ids: dict[str, int] = {}
    earliest: dict[tuple[int, int], int] = {}
    for r in raw:
        u = user_ids.setdefault(r.user, len(user_ids))
        i = item_ids.setdefault(r.item, len(item_ids))
        prev = earliest.get((u, i))
        if prev is None or r.timestamp < prev:
            earliest[(u, i)] = r.timestamp
    pairs = np.array(list(earliest.keys()), dtype=np.int64).reshape(-1, 2)
    ts = np.fromiter(earliest.values(), dtype=np.int64, count=len(earliest))
    graph = InteractionGraph(len(user_ids), len(item_ids), pairs[:, 0], pairs[:, 1], ts)
    return LoadedDataset(graph, list(user_ids), list(item_ids))


def write_interactions(path, g: InteractionGraph, delimiter: str = "\t", user_keys=None, item_keys=None) -> None:
    """Write edges in stored order; keys default to the dense indices."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    uk, ik = user_keys, item_keys
    with open(path, "w", encoding="utf-8") as fh:
        for u, i, t in zip(g.users.tolist(), g.items.tolist(), g.timestamps.tolist()):
            fh.write(f"{u if uk is None else uk[u]}{delimiter}{i if ik is None else ik[i]}{delimiter}{t}\n")


@dataclass(frozen=True)
class DatasetStats:
    num_users: int
    num_items: int
    num_interactions: int
    sparsity: float

    def __str__(self) -> str:
        return (
            f"users={self.num_users} items={self.num_items} "
            f"interactions={self.num_interactions} sparsity={self.sparsity:.2%}"
        )


def compute_stats(g: InteractionGraph) -> DatasetStats:
    if g.num_edges == 0:
        raise ContractError("statistics of an empty graph are undefined")
    density = g.num_edges / (g.num_users * g.num_items)
    return DatasetStats(g.num_users, g.num_items, g.num_edges, 1.0 - density)


def generate_synthetic(
    num_users: int,
    num_items: int,
    num_blocks: int,
    edges_per_user: int,
    noise: float,
    rng_seed: int,
) -> InteractionGraph:
    """Block-diagonal preferences with a few cross-block edges.

    Each user gets exactly ``edges_per_user`` distinct items, of which
    ``round(noise * edges_per_user)`` fall outside the user's block. All
    edges get distinct timestamps in random global order, so each user's
    history is spread over the time axis.
    """
    if num_blocks < 1 or num_users % num_blocks or num_items % num_blocks:
        raise ContractError("number of blocks must divide both users and items")
    if not 0.0 <= noise <= 1.0:
        raise ContractError("noise fraction must lie in [0, 1]")
    per_block_users = num_users // num_blocks
    per_block_items = num_items // num_blocks
    n_noise = int(round(noise * edges_per_user))
    n_in = edges_per_user - n_noise
    if edges_per_user < 1 or edges_per_user > per_block_items:
        raise ContractError("edges per user must be between 1 and the items per block")
    if n_noise > num_items - per_block_items:
        raise ContractError("not enough out-of-block items for the noise fraction")

    rng = np.random.default_rng(rng_seed)
    users, items = [], []
    all_items = np.arange(num_items)
    for u in range(num_users):
        b = min(u // per_block_users, num_blocks - 1)
        block = all_items[b * per_block_items : (b + 1) * per_block_items]
        outside = np.concatenate([all_items[: b * per_block_items], all_items[(b + 1) * per_block_items :]])
        chosen = np.concatenate(
            [rng.choice(block, n_in, replace=False), rng.choice(outside, n_noise, replace=False)]
        )
        users.append(np.full(edges_per_user, u))
        items.append(chosen)
    users = np.concatenate(users)
    items = np.concatenate(items)
    order = rng.permutation(users.size)
    ts = np.arange(users.size, dtype=np.int64)
    return InteractionGraph(num_users, num_items, users[order], items[order], ts)


def block_of(index: int, count: int, num_blocks: int) -> int:
    return index // (count // num_blocks)
