"""Feed-forward layers, additive attention, and the layer-spec registry.

Shape rules (batch B, time T, features/channels at the end):

- dense:            (B, F_in) -> (B, units)
- conv1d:           (B, T, D) -> (B, T - width + 1, filters)   (valid windows)
- max_pool1d:       (B, T, C) -> (B, ceil(T / pool), C)        (trailing window may be short)
- global_max_pool:  (B, T, C) -> (B, C)                        (per-channel maxima)
- dropout:          unchanged; train mode only, inverted scaling 1/(1 - rate)
- embedding:        (B, T) int -> (B, T, dim); row 0 is the zero padding row
- attention:        (B, T, H) -> (B, H)                        (softmax-weighted sum)

Sequence masking: the embedding layer derives a validity mask from the
padding index; conv and pooling shrink it along with the time axis, and
attention, global pooling and the recurrent layers consume it so padded
steps never influence the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, concat, gather_rows, maximum, softmax

PAD_INDEX = 0

ACTIVATIONS = ("sigmoid", "tanh", "relu", "softmax", "identity")
LAYER_KINDS = (
    "dense",
    "conv1d",
    "lstm",
    "bilstm",
    "gru",
    "embedding",
    "dropout",
    "attention",
    "global_max_pool",
    "max_pool1d",
)

# Additive penalty that zeroes a softmax weight without overflowing exp().
_MASK_PENALTY = 1e30


class ShapeError(ValueError):
    """Input shape incompatible with a layer; message names both."""


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Seeded random orthogonal n x n matrix (QR with sign fixing)."""
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def apply_activation(x: Tensor, name: str) -> Tensor:
    if name == "identity":
        return x
    if name == "sigmoid":
        return x.sigmoid()
    if name == "tanh":
        return x.tanh()
    if name == "relu":
        return x.relu()
    if name == "softmax":
        return softmax(x, axis=-1)
    raise ValueError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


@dataclass
class ForwardContext:
    """Per-call state threaded through a layer stack.

    ``mask`` is a float (B, T) array of {0, 1}; layers that change the time
    axis update it, layers that aggregate over time consume it. ``rng``
    drives dropout and must be provided in train mode.
    """

    train: bool = False
    rng: np.random.Generator | None = None
    mask: np.ndarray | None = None

    def valid_lengths(self) -> np.ndarray | None:
        return None if self.mask is None else self.mask.sum(axis=1).astype(np.int64)


class Layer:
    """Base class: parameters plus a ``__call__(x, ctx)`` forward."""

    kind: str = ""

    def params(self) -> list[tuple[str, Tensor]]:
        return []

    def __call__(self, x, ctx: ForwardContext):
        raise NotImplementedError


def forward(layer: Layer, x, train: bool = False, rng=None, mask=None):
    """Run one layer outside a stack (mainly for tests and gradcheck)."""
    return layer(x, ForwardContext(train=train, rng=rng, mask=mask))


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_dim: int, units: int, activation: str = "identity",
                 rng: np.random.Generator | None = None):
        if units < 1:
            raise ValueError(f"dense units must be positive, got {units}")
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.units = units
        self.activation = activation
        self.W = Tensor(glorot_uniform(rng, (in_dim, units), in_dim, units),
                        requires_grad=True, name="W")
        self.b = Tensor(np.zeros(units), requires_grad=True, name="b")

    def params(self):
        return [("W", self.W), ("b", self.b)]

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"dense expects (B, {self.in_dim}), got {x.shape}")
        return apply_activation(x @ self.W + self.b, self.activation)


class Conv1D(Layer):
    """Temporal convolution over (B, T, D) with valid windows."""

    kind = "conv1d"

    def __init__(self, in_dim: int, filters: int, width: int, activation: str = "relu",
                 rng: np.random.Generator | None = None):
        if filters < 1 or width < 1:
            raise ValueError(f"conv1d needs positive filters/width, got {filters}/{width}")
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.filters = filters
        self.width = width
        self.activation = activation
        fan_in, fan_out = width * in_dim, filters
        self.W = Tensor(glorot_uniform(rng, (width, in_dim, filters), fan_in, fan_out),
                        requires_grad=True, name="W")
        self.b = Tensor(np.zeros(filters), requires_grad=True, name="b")

    def params(self):
        return [("W", self.W), ("b", self.b)]

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"conv1d expects (B, T, {self.in_dim}), got {x.shape}")
        T = x.shape[1]
        if T < self.width:
            raise ShapeError(f"conv1d width {self.width} exceeds sequence length {T}")
        out_len = T - self.width + 1
        acc = x[:, 0:out_len, :] @ self.W[0]
        for k in range(1, self.width):
            acc = acc + x[:, k:k + out_len, :] @ self.W[k]
        out = apply_activation(acc + self.b, self.activation)
        if ctx.mask is not None:
            # A window is informative while it still touches a valid token;
            # with trailing padding that is max(L - width + 1, 1) positions
            # (at least one when the row has any valid token at all).
            lengths = ctx.mask.sum(axis=1)
            new_lengths = np.where(lengths > 0, np.clip(lengths - self.width + 1, 1, out_len), 0)
            ctx.mask = (np.arange(out_len)[None, :] < new_lengths[:, None]).astype(np.float64)
        return out


class MaxPool1D(Layer):
    """Non-overlapping temporal max over windows of ``pool`` steps.

    The output length is ceil(T / pool): a short trailing window is kept
    rather than dropped, so a length-1 sequence passes through unchanged.
    """

    kind = "max_pool1d"

    def __init__(self, pool: int = 2):
        if pool < 1:
            raise ValueError(f"pool size must be positive, got {pool}")
        self.pool = pool

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if x.ndim != 3:
            raise ShapeError(f"max_pool1d expects (B, T, C), got {x.shape}")
        T = x.shape[1]
        p = self.pool
        out = x[:, 0::p, :]
        for offset in range(1, p):
            tail = x[:, offset::p, :]
            n = tail.shape[1]
            if n == out.shape[1]:
                out = maximum(out, tail)
            elif n > 0:
                out = concat([maximum(out[:, :n, :], tail), out[:, n:, :]], axis=1)
        if ctx.mask is not None:
            lengths = ctx.mask.sum(axis=1)
            new_lengths = np.ceil(lengths / p)
            out_len = out.shape[1]
            ctx.mask = (np.arange(out_len)[None, :] < new_lengths[:, None]).astype(np.float64)
        return out


class GlobalMaxPool(Layer):
    """Per-channel maximum over time; padded steps are excluded when a mask
    is present (rows with no valid step fall back to the plain maximum)."""

    kind = "global_max_pool"

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if x.ndim != 3:
            raise ShapeError(f"global_max_pool expects (B, T, C), got {x.shape}")
        if ctx.mask is not None:
            penalty = _mask_penalty(ctx.mask)
            x = x + penalty[:, :, None]
        return x.max(axis=1)


class Dropout(Layer):
    """Inverted dropout: active in train mode only, scaling kept units by
    1/(1 - rate) so the expected output equals the input; eval mode is the
    identity."""

    kind = "dropout"

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if not ctx.train or self.rate == 0.0:
            return x
        if ctx.rng is None:
            raise ValueError("dropout in train mode needs a seeded rng on the context")
        keep = (ctx.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * Tensor(keep)


class Embedding(Layer):
    """Index lookup into a (V+2, dim) matrix; sets the context mask from the
    padding index. Frozen by default: no gradient reaches the matrix unless
    ``trainable``."""

    kind = "embedding"

    def __init__(self, matrix: np.ndarray, trainable: bool = False):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ShapeError(f"embedding matrix must be 2-D, got {matrix.shape}")
        self.matrix = Tensor(matrix.copy(), requires_grad=trainable, name="matrix")
        self.dim = matrix.shape[1]
        self.trainable = trainable

    def params(self):
        return [("matrix", self.matrix)] if self.trainable else []

    def __call__(self, indices, ctx: ForwardContext) -> Tensor:
        indices = np.asarray(indices)
        if indices.ndim != 2:
            raise ShapeError(f"embedding expects (B, T) indices, got {indices.shape}")
        ctx.mask = (indices != PAD_INDEX).astype(np.float64)
        return gather_rows(self.matrix, indices)


@dataclass(frozen=True)
class AttentionState:
    """Intermediates of one attention application over a single sequence:
    the hidden states, their alignment scores, the softmax weights, and the
    weighted-sum context vector."""

    hidden_states: np.ndarray
    alignment_scores: np.ndarray
    weights: np.ndarray
    context: np.ndarray


class AdditiveAttention(Layer):
    """Additive (concat-style) attention over encoder states.

    Score per step: v . tanh(h_t W + b); weights are the softmax of the
    scores over time; output is the weights-weighted sum of the states,
    which therefore lies in their coordinate-wise convex hull.
    """

    kind = "attention"

    def __init__(self, in_dim: int, attention_units: int | None = None,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        units = attention_units or in_dim
        if units < 1:
            raise ValueError(f"attention units must be positive, got {units}")
        self.in_dim = in_dim
        self.units = units
        self.W = Tensor(glorot_uniform(rng, (in_dim, units), in_dim, units),
                        requires_grad=True, name="W")
        self.b = Tensor(np.zeros(units), requires_grad=True, name="b")
        self.v = Tensor(glorot_uniform(rng, (units, 1), units, 1),
                        requires_grad=True, name="v")

    def params(self):
        return [("W", self.W), ("b", self.b), ("v", self.v)]

    def scores_and_weights(self, states: Tensor, mask: np.ndarray | None):
        scores = ((states @ self.W + self.b).tanh() @ self.v).reshape(states.shape[0], states.shape[1])
        if mask is not None:
            # Unconditional penalty: a row with no valid step gets the same
            # penalty everywhere, which the softmax shift cancels into
            # uniform weights instead of leaving them undefined.
            scores = scores + Tensor((mask - 1.0) * _MASK_PENALTY)
        weights = softmax(scores, axis=1)
        return scores, weights

    def __call__(self, states: Tensor, ctx: ForwardContext) -> Tensor:
        if states.ndim != 3 or states.shape[2] != self.in_dim:
            raise ShapeError(f"attention expects (B, T, {self.in_dim}), got {states.shape}")
        _, weights = self.scores_and_weights(states, ctx.mask)
        context = (states * weights.reshape(weights.shape[0], weights.shape[1], 1)).sum(axis=1)
        return context


def _mask_penalty(mask: np.ndarray) -> np.ndarray:
    """Additive value penalty for max pooling: -1e30 on padded steps.
    Rows with no valid step get no penalty, falling back to the plain
    maximum (a penalty everywhere would corrupt the pooled value)."""
    any_valid = mask.any(axis=1, keepdims=True)
    return np.where(any_valid, (mask - 1.0) * _MASK_PENALTY, 0.0)


def attention(hidden_states, score_weights, score_bias, score_vector) -> AttentionState:
    """Single-sequence additive attention with explicit parameters.

    ``hidden_states`` is (T, H); returns every intermediate as plain arrays.
    """
    states = np.asarray(hidden_states, dtype=np.float64)
    if states.ndim != 2 or states.shape[0] < 1:
        raise ShapeError(f"attention expects (T, H) with T >= 1, got {states.shape}")
    layer = AdditiveAttention.__new__(AdditiveAttention)
    layer.in_dim = states.shape[1]
    layer.W = Tensor(np.asarray(score_weights, dtype=np.float64))
    layer.b = Tensor(np.asarray(score_bias, dtype=np.float64))
    layer.v = Tensor(np.asarray(score_vector, dtype=np.float64).reshape(-1, 1))
    layer.units = layer.W.shape[1]
    batched = Tensor(states[None, :, :])
    scores, weights = layer.scores_and_weights(batched, None)
    context = (batched * weights.reshape(1, states.shape[0], 1)).sum(axis=1)
    return AttentionState(
        hidden_states=states.copy(),
        alignment_scores=scores.data[0].copy(),
        weights=weights.data[0].copy(),
        context=context.data[0].copy(),
    )


@dataclass(frozen=True)
class LayerSpec:
    """Declarative layer description used by model configurations.

    ``size`` holds the kind-specific size parameters (all positive);
    ``returns_sequence`` only matters for recurrent kinds.
    """

    kind: str
    size: dict = field(default_factory=dict)
    activation: str = "identity"
    returns_sequence: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}; expected one of {LAYER_KINDS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}"
            )
        for key, value in self.size.items():
            if key != "rate" and value < 1:
                raise ValueError(f"{self.kind}: size parameter {key}={value} must be positive")


def build_layer(spec: LayerSpec, in_dim: int, rng: np.random.Generator,
                matrix: np.ndarray | None = None, trainable_embeddings: bool = False):
    """Instantiate a layer from its spec; returns (layer, output feature dim)."""
    from .recurrent import LSTM, BiLSTM, GRU

    if spec.kind == "dense":
        layer = Dense(in_dim, spec.size["units"], spec.activation, rng)
        return layer, spec.size["units"]
    if spec.kind == "conv1d":
        layer = Conv1D(in_dim, spec.size["filters"], spec.size["width"], spec.activation, rng)
        return layer, spec.size["filters"]
    if spec.kind == "max_pool1d":
        return MaxPool1D(spec.size.get("pool", 2)), in_dim
    if spec.kind == "global_max_pool":
        return GlobalMaxPool(), in_dim
    if spec.kind == "dropout":
        return Dropout(spec.size["rate"]), in_dim
    if spec.kind == "embedding":
        if matrix is None:
            raise ValueError("embedding layer needs the embedding matrix")
        layer = Embedding(matrix, trainable=trainable_embeddings)
        return layer, layer.dim
    if spec.kind == "attention":
        layer = AdditiveAttention(in_dim, spec.size.get("attention_units"), rng)
        return layer, in_dim
    if spec.kind == "lstm":
        layer = LSTM(in_dim, spec.size["units"], return_sequences=spec.returns_sequence, rng=rng)
        return layer, spec.size["units"]
    if spec.kind == "gru":
        layer = GRU(in_dim, spec.size["units"], return_sequences=spec.returns_sequence, rng=rng)
        return layer, spec.size["units"]
    if spec.kind == "bilstm":
        layer = BiLSTM(in_dim, spec.size["units"], return_sequences=spec.returns_sequence, rng=rng)
        return layer, 2 * spec.size["units"]
    raise ValueError(f"unknown layer kind {spec.kind!r}")
