"""Chronological splitting and top-K ranking metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grad import ContractError, as_tensor
from .graph import InteractionGraph

DEFAULT_KS = (10, 20, 50)


@dataclass(frozen=True)
class SplitDataset:
    train: InteractionGraph
    valid: InteractionGraph
    test: InteractionGraph

    @property
    def num_users(self) -> int:
        return self.train.num_users

    @property
    def num_items(self) -> int:
        return self.train.num_items


def chronological_split(g: InteractionGraph, ratios: Sequence[float] = (0.7, 0.1, 0.2)) -> SplitDataset:
    """Global sort by (timestamp, user, item), then cut at floor(r1*n), floor((r1+r2)*n)."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0 or not math.isclose(sum(ratios), 1.0):
        raise ContractError(f"need three positive ratios summing to 1, got {ratios}")
    n = g.num_edges
    if n < 10:
        raise ContractError(f"need at least 10 interactions to split, got {n}")
    order = np.lexsort((g.items, g.users, g.timestamps))
    # e.g. 0.7 + 0.1 is 0.7999999999999999 in binary floating point; round first
    c1 = math.floor(round(ratios[0] * n, 9))
    c2 = math.floor(round((ratios[0] + ratios[1]) * n, 9))
    return SplitDataset(g.subgraph(order[:c1]), g.subgraph(order[c1:c2]), g.subgraph(order[c2:]))


def recall_at_k(ranked: Sequence[int], test_items, k: int) -> float:
    if k < 1:
        raise ContractError("K must be at least 1")
    test = set(int(i) for i in test_items)
    if not test:
        raise ContractError("recall is undefined for an empty test set")
    hits = sum(1 for i in list(ranked)[:k] if int(i) in test)
    return hits / len(test)


def ndcg_at_k(ranked: Sequence[int], test_items, k: int) -> float:
    if k < 1:
        raise ContractError("K must be at least 1")
    test = set(int(i) for i in test_items)
    if not test:
        raise ContractError("NDCG is undefined for an empty test set")
    dcg = math.fsum(1.0 / math.log2(p + 2) for p, i in enumerate(list(ranked)[:k]) if int(i) in test)
    idcg = math.fsum(1.0 / math.log2(p + 2) for p in range(min(k, len(test))))
    return dcg / idcg


@dataclass
class RankingResult:
    """Per-user metric arrays (aligned with ``users``) and their means."""

    users: np.ndarray
    per_user: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def mean(self) -> dict[str, float]:
        return {k: float(v.mean()) if v.size else 0.0 for k, v in self.per_user.items()}

    def __getitem__(self, key: str) -> float:
        return self.mean[key]


def _grouped(g: InteractionGraph) -> list[np.ndarray]:
    order = np.lexsort((g.items, g.users))
    cuts = np.cumsum(np.bincount(g.users, minlength=g.num_users))[:-1]
    return np.split(g.items[order], cuts)


def evaluate_model(
    final_user,
    final_item,
    split: SplitDataset,
    ks: Sequence[int] = DEFAULT_KS,
    target: str = "test",
    user_chunk: int = 1024,
) -> RankingResult:
    """Rank all items per user and average Recall@K / NDCG@K over users.

    For ``target="test"`` the user's train and validation items are masked;
    for ``target="valid"`` only train items are. Ties go to the lower item
    index. Users without target items are skipped.
    """
    if target not in ("test", "valid"):
        raise ContractError(f"target must be 'test' or 'valid', got {target!r}")
    fu = as_tensor(final_user).data
    fi = as_tensor(final_item).data
    if fu.shape[1] != fi.shape[1]:
        raise ContractError("user and item embeddings differ in width")
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ContractError("need at least one K >= 1")
    truth = _grouped(getattr(split, target))
    masked = [split.train] if target == "valid" else [split.train, split.valid]
    users = np.array([u for u, t in enumerate(truth) if t.size], dtype=np.int64)

    kmax = min(ks[-1], fi.shape[0])
    top = np.empty((users.size, kmax), dtype=np.int64)
    for s in range(0, users.size, user_chunk):
        batch = users[s : s + user_chunk]
        scores = fu[batch] @ fi.T
        rows = {int(u): r for r, u in enumerate(batch)}
        for m in masked:
            sel = np.isin(m.users, batch)
            scores[[rows[int(u)] for u in m.users[sel]], m.items[sel]] = -np.inf
        # stable sort on -score keeps ascending item index among ties
        top[s : s + batch.size] = np.argsort(-scores, axis=1, kind="stable")[:, :kmax]

    result = RankingResult(users, {f"{m}@{k}": np.empty(users.size) for k in ks for m in ("recall", "ndcg")})
    for r, u in enumerate(users):
        ranked = top[r].tolist()
        for k in ks:
            result.per_user[f"recall@{k}"][r] = recall_at_k(ranked, truth[u], k)
            result.per_user[f"ndcg@{k}"][r] = ndcg_at_k(ranked, truth[u], k)
    return result
