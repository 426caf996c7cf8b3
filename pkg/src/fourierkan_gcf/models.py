"""Layer-wise message passing and readout for every supported GCF variant."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import grad as G
from . import seeding
from .grad import ContractError, Parameter, ShapeError, Tensor
from .graph import NormalizedAdjacency
from .kan import FourierKan, Linear, SplineKan


class Variant(str, enum.Enum):
    NGCF = "ngcf"
    NGCF_F1 = "ngcf-f1"
    NGCF_F2 = "ngcf-f2"
    NGCF_I = "ngcf-i"
    NGCF_N = "ngcf-n"
    LIGHTGCN = "lightgcn"
    KAN_GCF = "kan-gcf"
    FOURIERKAN_GCF = "fourierkan-gcf"

    @classmethod
    def parse(cls, name: "str | Variant") -> "Variant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {"fkan-gcf": "fourierkan-gcf", "fourierkangcf": "fourierkan-gcf", "kangcf": "kan-gcf"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ContractError(f"unknown model variant {name!r}; choose from {choices}") from None

    @property
    def uses_w1(self) -> bool:
        return self in (Variant.NGCF, Variant.NGCF_F2, Variant.NGCF_I, Variant.NGCF_N)

    @property
    def uses_w2(self) -> bool:
        return self in (Variant.NGCF, Variant.NGCF_F1, Variant.NGCF_N)

    @property
    def kan_kind(self) -> type | None:
        return {Variant.KAN_GCF: SplineKan, Variant.FOURIERKAN_GCF: FourierKan}.get(self)

    @property
    def readout(self) -> str:
        return "mean" if self is Variant.LIGHTGCN else "concat"


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "leaky_relu": lambda x: G.leaky_relu(x, 0.2),
    "sigmoid": G.sigmoid,
    "identity": lambda x: x,
}


@dataclass
class LayerTransforms:
    w1: Linear | None = None
    w2: Linear | None = None
    kan: FourierKan | SplineKan | None = None

    def parameters(self) -> list[Parameter]:
        out: list[Parameter] = []
        for part in (self.w1, self.w2, self.kan):
            if part is not None:
                out.extend(part.parameters())
        return out


def _check_transforms(variant: Variant, t: LayerTransforms) -> None:
    if (t.w1 is not None) != variant.uses_w1:
        raise ContractError(f"{variant.value}: W1 must be {'given' if variant.uses_w1 else 'absent'}")
    if (t.w2 is not None) != variant.uses_w2:
        raise ContractError(f"{variant.value}: W2 must be {'given' if variant.uses_w2 else 'absent'}")
    kind = variant.kan_kind
    if kind is None and t.kan is not None:
        raise ContractError(f"{variant.value} takes no KAN transform")
    if kind is not None and not isinstance(t.kan, kind):
        raise ContractError(f"{variant.value} needs a {kind.__name__} transform")


def message_masks(num_edges: int, p_m: float, rng_seed) -> tuple[np.ndarray, np.ndarray] | None:
    """Per-edge keep masks for item->user and user->item messages.

    Kept messages are scaled by 1/(1-p_m). Returns None when p_m == 0.
    """
    if not 0.0 <= p_m < 1.0:
        raise ContractError(f"message dropout ratio must lie in [0, 1), got {p_m}")
    if p_m == 0.0:
        return None
    if rng_seed is None:
        raise ContractError("message dropout needs an explicit seed")
    rng = np.random.default_rng(rng_seed)
    keep = 1.0 / (1.0 - p_m)
    to_users = (rng.random(num_edges) >= p_m) * keep
    to_items = (rng.random(num_edges) >= p_m) * keep
    return to_users, to_items


def propagate_layer(
    variant: Variant | str,
    adj: NormalizedAdjacency,
    e_u: Tensor,
    e_i: Tensor,
    transforms: LayerTransforms,
    p_m: float = 0.0,
    rng_seed=None,
    activation: str = "leaky_relu",
) -> tuple[Tensor, Tensor]:
    """One round of message passing; returns next-layer (user, item) embeddings."""
    variant = Variant.parse(variant)
    _check_transforms(variant, transforms)
    if e_u.shape[0] != adj.num_users or e_i.shape[0] != adj.num_items:
        raise ShapeError("embedding row counts do not match the graph")
    if activation not in ACTIVATIONS:
        raise ContractError(f"unknown activation {activation!r}")

    w = adj.edge_weights
    masks = message_masks(adj.num_edges, p_m, rng_seed)
    wu, wi = (w, w) if masks is None else (w * masks[0], w * masks[1])
    A_ui = adj.user_item.with_values(wu)
    A_iu = adj.item_user.with_values(wi[adj.item_order])

    if variant is Variant.LIGHTGCN:
        return G.sparse_dense_matmul(A_ui, e_i), G.sparse_dense_matmul(A_iu, e_u)

    w1 = transforms.w1 if transforms.w1 is not None else (lambda x: x)
    t_u, t_i = w1(e_u), w1(e_i)
    agg_u = G.sparse_dense_matmul(A_ui, t_i)
    agg_i = G.sparse_dense_matmul(A_iu, t_u)

    if variant is not Variant.NGCF_I:
        inter = G.mul(G.take_rows(e_i, adj.edge_items), G.take_rows(e_u, adj.edge_users))
        if transforms.kan is not None:
            msg = transforms.kan(inter)
        elif transforms.w2 is not None:
            msg = transforms.w2(inter)
        else:
            msg = inter
        S_u, S_i = adj.edge_scatter(wu, wi)
        agg_u = agg_u + G.sparse_dense_matmul(S_u, msg)
        agg_i = agg_i + G.sparse_dense_matmul(S_i, msg)

    sigma = ACTIVATIONS["identity" if variant is Variant.NGCF_N else activation]
    return sigma(t_u + agg_u), sigma(t_i + agg_i)


# ---------------------------------------------------------------------------
# readout and scoring


@dataclass
class EmbeddingState:
    layers: list[tuple[Tensor, Tensor]]
    final_user: Tensor
    final_item: Tensor


def readout_concat(layers: list[tuple[Tensor, Tensor]]) -> tuple[Tensor, Tensor]:
    """Concatenate layers 1..L along features; layer 0 is dropped."""
    if len(layers) < 2:
        raise ContractError("concat readout needs at least one propagated layer")
    return G.concat([u for u, _ in layers[1:]]), G.concat([i for _, i in layers[1:]])


def readout_mean(layers: list[tuple[Tensor, Tensor]]) -> tuple[Tensor, Tensor]:
    """Average of layers 0..L."""
    if not layers:
        raise ContractError("mean readout needs the ego layer")
    return G.mean_of([u for u, _ in layers]), G.mean_of([i for _, i in layers])


def score(final_user, final_item, u: int, i: int) -> float:
    fu = G.as_tensor(final_user).data
    fi = G.as_tensor(final_item).data
    if fu.shape[1] != fi.shape[1]:
        raise ContractError(f"user dim {fu.shape[1]} != item dim {fi.shape[1]}")
    return float(fu[u] @ fi[i])


# ---------------------------------------------------------------------------
# full model


@dataclass
class ModelConfig:
    variant: Variant = Variant.FOURIERKAN_GCF
    dim: int = 64
    layers: int = 3
    grid_size: int = 2
    spline_intervals: int = 4
    spline_order: int = 3
    activation: str = "leaky_relu"
    shared_weights: bool = False

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        if self.layers < 1 and self.variant.readout == "concat":
            raise ContractError("concat readout needs at least one layer")
        if self.layers < 0:
            raise ContractError("layer count must be non-negative")
        if self.grid_size < 1:
            raise ContractError("grid size must be at least 1")


def xavier_uniform(shape, rng: np.random.Generator) -> np.ndarray:
    """Glorot uniform over the trailing two dims (vectors use their length)."""
    shape = tuple(int(s) for s in shape)
    if not shape:
        raise ContractError("xavier init needs a non-empty shape")
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_out, fan_in = shape[-2], shape[-1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, shape)


@dataclass
class GCFModel:
    config: ModelConfig
    user_emb: Parameter
    item_emb: Parameter
    transforms: list[LayerTransforms] = field(default_factory=list)

    @classmethod
    def init(cls, config: ModelConfig, num_users: int, num_items: int, seed: int = 0) -> "GCFModel":
        d = config.dim
        user = Parameter(xavier_uniform((num_users, d), seeding.rng(seed, "user_emb")), "user_emb")
        item = Parameter(xavier_uniform((num_items, d), seeding.rng(seed, "item_emb")), "item_emb")
        n_sets = 1 if config.shared_weights else config.layers
        sets = [_init_transforms(config, seeding.rng(seed, "layer", k), k) for k in range(n_sets)]
        if config.shared_weights:
            sets = sets * config.layers
        return cls(config, user, item, sets)

    @property
    def variant(self) -> Variant:
        return self.config.variant

    def parameters(self) -> list[Parameter]:
        out = [self.user_emb, self.item_emb]
        for t in self.transforms:
            for p in t.parameters():
                if not any(p is q for q in out):
                    out.append(p)
        return out

    def forward(self, adj: NormalizedAdjacency, p_m: float = 0.0, rng_seed=None) -> EmbeddingState:
        layers = [(G.as_tensor(self.user_emb), G.as_tensor(self.item_emb))]
        for k, t in enumerate(self.transforms):
            seed = None if rng_seed is None else seeding.derive(rng_seed, k)
            e_u, e_i = layers[-1]
            layers.append(
                propagate_layer(self.variant, adj, e_u, e_i, t, p_m, seed, self.config.activation)
            )
        readout = readout_mean if self.variant.readout == "mean" else readout_concat
        fu, fi = readout(layers)
        return EmbeddingState(layers, fu, fi)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.data[...] = state[p.name]


def _init_transforms(config: ModelConfig, rng: np.random.Generator, k: int) -> LayerTransforms:
    v, d = config.variant, config.dim
    t = LayerTransforms()
    if v.uses_w1:
        t.w1 = Linear(Parameter(xavier_uniform((d, d), rng), f"layer{k}.W1"))
    if v.uses_w2:
        t.w2 = Linear(Parameter(xavier_uniform((d, d), rng), f"layer{k}.W2"))
    if v is Variant.FOURIERKAN_GCF:
        t.kan = FourierKan.init(d, d, config.grid_size, rng, name=f"layer{k}.fkan")
    elif v is Variant.KAN_GCF:
        t.kan = SplineKan.init(
            d, d, rng, config.spline_intervals, config.spline_order, name=f"layer{k}.skan"
        )
    return t
