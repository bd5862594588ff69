"""Minimal double-precision reverse-mode compute core.

Everything runs on float64 numpy arrays; the graph is built eagerly and
gradients flow through closures attached to each node. The op set is
deliberately small: exactly what embedding/conv/recurrent/attention
classifiers need, nothing generic beyond that.
"""

from .tensor import Tensor, concat, stack, maximum, softmax, gather_rows
from .layers import (
    AdditiveAttention,
    AttentionState,
    Conv1D,
    Dense,
    Dropout,
    Embedding,
    ForwardContext,
    GlobalMaxPool,
    Layer,
    LayerSpec,
    MaxPool1D,
    ShapeError,
    attention,
    build_layer,
    forward,
    glorot_uniform,
    orthogonal,
)
from .recurrent import LSTM, BiLSTM, GRU
from .losses import binary_cross_entropy, bce_loss
from .optim import Adam
from .gradcheck import GradientCheckError, grad_check
from .checkpoint import load_params, save_params

__all__ = [
    "Tensor", "concat", "stack", "maximum", "softmax", "gather_rows",
    "Layer", "LayerSpec", "ForwardContext", "ShapeError", "build_layer", "forward",
    "Dense", "Conv1D", "MaxPool1D", "GlobalMaxPool", "Dropout", "Embedding",
    "AdditiveAttention", "AttentionState", "attention",
    "glorot_uniform", "orthogonal",
    "LSTM", "BiLSTM", "GRU",
    "binary_cross_entropy", "bce_loss",
    "Adam",
    "grad_check", "GradientCheckError",
    "save_params", "load_params",
]
