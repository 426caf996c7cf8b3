"""BPR objective, triplet sampling, Adam and the per-epoch training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import grad as G
from . import seeding
from .grad import ContractError, Parameter, Tape, Tensor, backward
from .graph import InteractionGraph, NormalizedAdjacency, node_dropout
from .models import GCFModel, xavier_uniform

log = logging.getLogger(__name__)

SEARCH_L2_GRID = (0.0, 1e-2, 1e-1, 1.0, 10.0)
SEARCH_LAYER_GRID = (1, 2, 3, 4)
SEARCH_GRID_SIZES = (1, 2, 4, 8)
SEARCH_DROPOUT_GRID = (0.0, 0.1, 0.2, 0.3)


class TrainingDivergence(RuntimeError):
    """Raised when a gradient contains NaN or Inf."""


@dataclass
class TrainConfig:
    lr: float = 1e-3
    l2: float = 1e-4
    epochs: int = 50
    batch_size: int = 2048
    msg_dropout: float = 0.0
    node_dropout: float = 0.0
    seed: int = 0
    search_grid: bool = False

    def __post_init__(self):
        if self.lr < 0 or self.l2 < 0:
            raise ContractError("learning rate and l2 strength must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ContractError("batch size must be positive and epochs non-negative")
        for name in ("msg_dropout", "node_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ContractError(f"{name} must lie in [0, 1)")
        if self.search_grid:
            if self.l2 not in SEARCH_L2_GRID:
                raise ContractError(f"l2 {self.l2} is off the grid {SEARCH_L2_GRID}")
            for name in ("msg_dropout", "node_dropout"):
                if getattr(self, name) not in SEARCH_DROPOUT_GRID:
                    raise ContractError(f"{name} is off the grid {SEARCH_DROPOUT_GRID}")


def xavier_init(shape: Sequence[int], rng_seed) -> np.ndarray:
    """Seeded Glorot-uniform sample; bound sqrt(6 / (fan_in + fan_out))."""
    return xavier_uniform(shape, np.random.default_rng(rng_seed))


# ---------------------------------------------------------------------------
# triplets


class BprTriplet(NamedTuple):
    user: int
    pos: int
    neg: int


@dataclass(frozen=True)
class TripletBatch:
    users: np.ndarray
    pos: np.ndarray
    neg: np.ndarray

    def __len__(self) -> int:
        return int(self.users.size)

    def __iter__(self) -> Iterator[BprTriplet]:
        for u, p, n in zip(self.users.tolist(), self.pos.tolist(), self.neg.tolist()):
            yield BprTriplet(u, p, n)

    def __getitem__(self, sl: slice) -> "TripletBatch":
        return TripletBatch(self.users[sl], self.pos[sl], self.neg[sl])

    @classmethod
    def from_triplets(cls, triplets: Sequence[tuple[int, int, int]]) -> "TripletBatch":
        arr = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])


def sample_triplets(train: InteractionGraph, rng_seed, batch_size: int | None = None) -> TripletBatch:
    """One (user, positive, negative) per training edge, shuffled.

    Negatives are drawn uniformly from items the user never touched in
    ``train`` by rejection. Users that interacted with every item are
    skipped. ``batch_size`` truncates the result when given.
    """
    rng = np.random.default_rng(rng_seed)
    n_items = train.num_items
    full = train.user_degrees() >= n_items
    if full.any():
        log.warning("skipping %d user(s) with no possible negative item", int(full.sum()))
    keep = ~full[train.users]
    users, pos = train.users[keep], train.items[keep]
    order = rng.permutation(users.size)
    users, pos = users[order], pos[order]
    if batch_size is not None:
        users, pos = users[:batch_size], pos[:batch_size]

    seen = np.sort(train.users * n_items + train.items)
    neg = rng.integers(0, n_items, users.size)
    bad = np.isin(users * n_items + neg, seen, assume_unique=False)
    while bad.any():
        neg[bad] = rng.integers(0, n_items, int(bad.sum()))
        bad[bad] = np.isin(users[bad] * n_items + neg[bad], seen)
    return TripletBatch(users, pos, neg)


# ---------------------------------------------------------------------------
# objective


def bpr_loss(
    final_user: Tensor,
    final_item: Tensor,
    triplets: TripletBatch,
    l2: float,
    params: Sequence[Parameter] = (),
) -> Tensor:
    """Summed -ln sigmoid(score_pos - score_neg) plus l2 * ||params||^2."""
    if len(triplets) == 0:
        raise ContractError("BPR loss needs at least one triplet")
    if l2 < 0:
        raise ContractError("l2 strength must be non-negative")
    eu = G.take_rows(final_user, triplets.users)
    margin = G.rowdot(eu, G.take_rows(final_item, triplets.pos)) - G.rowdot(
        eu, G.take_rows(final_item, triplets.neg)
    )
    loss = G.sum_all(G.neg_log_sigmoid(margin))
    if l2 > 0 and params:
        reg = G.sum_squares(params[0])
        for p in params[1:]:
            reg = reg + G.sum_squares(p)
        loss = loss + G.scale(reg, l2)
    return loss


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[Parameter, np.ndarray] = field(default_factory=dict)
    v: dict[Parameter, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Sequence[Parameter],
    grads: dict[Parameter, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    for p in params:
        g = grads[p]
        if g.shape != p.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.shape} ({p.name})")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergence(f"non-finite gradient for {p.name or p!r} at step {state.step + 1}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for p in params:
        g = grads[p]
        m = state.m.get(p)
        if m is None:
            m = state.m[p] = np.zeros_like(p.data)
            state.v[p] = np.zeros_like(p.data)
        v = state.v[p]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# epoch loop


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    grad_norm: float
    num_triplets: int


def train_epoch(
    model: GCFModel,
    train: InteractionGraph,
    adj: NormalizedAdjacency,
    config: TrainConfig,
    state: AdamState,
    epoch: int,
) -> EpochStats:
    """Resample node dropout, then BPR + Adam over shuffled triplet batches.

    ``adj`` must be the normalized operator of ``train``.
    """
    epoch_adj = node_dropout(adj, config.node_dropout, seeding.derive(config.seed, "node", epoch))
    triplets = sample_triplets(train, seeding.derive(config.seed, "triplets", epoch))
    params = model.parameters()
    total, norms = 0.0, []
    for b, start in enumerate(range(0, len(triplets), config.batch_size)):
        batch = triplets[start : start + config.batch_size]
        with Tape() as tape:
            tape.register(*params)
            out = model.forward(
                epoch_adj, config.msg_dropout, seeding.derive(config.seed, "msg", epoch, b)
            )
            loss = bpr_loss(out.final_user, out.final_item, batch, config.l2, params)
        grads = backward(loss, tape)
        adam_step(params, grads, state, config.lr)
        total += loss.item()
        norms.append(math.sqrt(sum(float(np.sum(grads[p] ** 2)) for p in params)))
    n = len(triplets)
    return EpochStats(epoch, total / max(n, 1), float(np.mean(norms)) if norms else 0.0, n)

