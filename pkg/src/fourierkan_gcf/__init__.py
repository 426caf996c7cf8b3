"""Graph collaborative filtering with Fourier KAN message transforms."""

from .data import compute_stats, generate_synthetic, load_interactions
from .evaluation import chronological_split, evaluate_model
from .grad import ContractError, Parameter, ShapeError, SparseMatrix, Tape, Tensor, backward
from .graph import InteractionGraph, build_normalized_adjacency, node_dropout
from .kan import FourierKan, Linear, SplineKan
from .models import GCFModel, ModelConfig, Variant
from .training import TrainConfig, bpr_loss, train_epoch

__all__ = [
    "ContractError",
    "FourierKan",
    "GCFModel",
    "InteractionGraph",
    "Linear",
    "ModelConfig",
    "Parameter",
    "ShapeError",
    "SparseMatrix",
    "SplineKan",
    "Tape",
    "Tensor",
    "TrainConfig",
    "Variant",
    "backward",
    "bpr_loss",
    "build_normalized_adjacency",
    "chronological_split",
    "compute_stats",
    "evaluate_model",
    "generate_synthetic",
    "load_interactions",
    "node_dropout",
    "train_epoch",
]
