"""The six classifier architectures, assembled from engine layers.

Reference layer sequences (all end in a single sigmoid unit, all apply
dropout 0.2 right after the embedding, every size is overridable):

    cnn_attention:    embedding > dropout > conv1d(64 filters, width 3, relu) > attention > dense(1)
    cnn_lstm:         embedding > dropout > conv1d(64, 3, relu) > max_pool1d(2) > lstm(64) > dense(1)
    lstm:             embedding > dropout > lstm(128, final state) > dense(1)
    bilstm:           embedding > dropout > bilstm(64 per direction, final states) > dense(1)
    bilstm_attention: embedding > dropout > bilstm(64, all states) > attention > dense(1)
    gru:              embedding > dropout > gru(128, final state) > dense(1)

Embeddings come from a distilled EmbeddingMatrix and stay frozen unless
``trainable_embeddings`` is set, so two runs differing only in the
embedding source compare embedding quality, not embedding training.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .distill import EmbeddingMatrix
from .engine import ForwardContext, LayerSpec, Tensor, build_layer
from .seeding import rng_for

ARCHITECTURES = ("cnn_attention", "cnn_lstm", "lstm", "bilstm", "bilstm_attention", "gru")
EMBEDDING_SOURCES = ("static_be", "word_vectors", "concat")

_DEFAULT_HIDDEN = {
    "cnn_attention": 64,   # conv filter count doubles as the feature width
    "cnn_lstm": 64,
    "lstm": 128,
    "bilstm": 64,
    "bilstm_attention": 64,
    "gru": 128,
}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture choice plus every size knob, with reference defaults."""

    architecture: str
    embedding_source: str = "static_be"
    max_len: int = 64
    hidden_size: int | None = None
    attention_size: int | None = None
    conv_filters: int = 64
    conv_width: int = 3
    dropout: float = 0.2
    trainable_embeddings: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(
                f"unknown architecture {self.architecture!r}; valid: {', '.join(ARCHITECTURES)}"
            )
        if self.embedding_source not in EMBEDDING_SOURCES:
            raise ValueError(
                f"unknown embedding source {self.embedding_source!r}; valid: {', '.join(EMBEDDING_SOURCES)}"
            )
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        for name in ("hidden_size", "attention_size", "conv_filters", "conv_width"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def hidden(self) -> int:
        return self.hidden_size if self.hidden_size is not None else _DEFAULT_HIDDEN[self.architecture]

    def with_overrides(self, **kwargs) -> "ModelConfig":
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "embedding_source": self.embedding_source,
            "max_len": self.max_len,
            "hidden_size": self.hidden,
            "attention_size": self.attention_size,
            "conv_filters": self.conv_filters,
            "conv_width": self.conv_width,
            "dropout": self.dropout,
            "trainable_embeddings": self.trainable_embeddings,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Prediction:
    probability: float
    predicted_label: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "predicted_label", 1 if self.probability >= 0.5 else 0)


def layer_specs(config: ModelConfig) -> list[LayerSpec]:
    """The frozen layer sequence for an architecture."""
    arch = config.architecture
    emb = LayerSpec("embedding")
    drop = LayerSpec("dropout", size={"rate": config.dropout})
    dense = LayerSpec("dense", size={"units": 1}, activation="sigmoid")
    attn = LayerSpec("attention", size=(
        {"attention_units": config.attention_size} if config.attention_size else {}
    ))
    if arch == "cnn_attention":
        conv = LayerSpec("conv1d", size={"filters": config.conv_filters, "width": config.conv_width},
                         activation="relu")
        return [emb, drop, conv, attn, dense]
    if arch == "cnn_lstm":
        conv = LayerSpec("conv1d", size={"filters": config.conv_filters, "width": config.conv_width},
                         activation="relu")
        pool = LayerSpec("max_pool1d", size={"pool": 2})
        return [emb, drop, conv, pool, LayerSpec("lstm", size={"units": config.hidden}), dense]
    if arch == "lstm":
        return [emb, drop, LayerSpec("lstm", size={"units": config.hidden}), dense]
    if arch == "bilstm":
        return [emb, drop, LayerSpec("bilstm", size={"units": config.hidden}), dense]
    if arch == "bilstm_attention":
        recurrent = LayerSpec("bilstm", size={"units": config.hidden}, returns_sequence=True)
        return [emb, drop, recurrent, attn, dense]
    if arch == "gru":
        return [emb, drop, LayerSpec("gru", size={"units": config.hidden}), dense]
    raise ValueError(f"unknown architecture {arch!r}")


class Model:
    """An instantiated layer stack mapping index sequences to a hate
    probability."""

    def __init__(self, config: ModelConfig, layers: list[tuple[str, object]]):
        self.config = config
        self.layers = layers

    def forward(self, indices: np.ndarray, train: bool = False, rng=None) -> Tensor:
        """(B, max_len) int indices -> (B, 1) probabilities."""
        indices = np.asarray(indices)
        if indices.ndim != 2 or indices.shape[1] != self.config.max_len:
            raise ValueError(
                f"expected (B, {self.config.max_len}) indices, got {indices.shape}"
            )
        ctx = ForwardContext(train=train, rng=rng)
        out = indices
        for _, layer in self.layers:
            out = layer(out, ctx)
        return out

    def predict(self, encoded) -> Prediction:
        """Deterministic (eval mode) prediction for one encoded example."""
        indices = np.asarray(getattr(encoded, "indices", encoded), dtype=np.int64)
        prob = self.forward(indices[None, :]).data[0, 0]
        return Prediction(probability=float(prob))

    def predict_proba(self, indices: np.ndarray) -> np.ndarray:
        """Eval-mode probabilities for a batch, as a flat array."""
        return self.forward(np.asarray(indices)).data.reshape(-1)

    def params(self) -> list[tuple[str, Tensor]]:
        named = []
        for layer_name, layer in self.layers:
            named.extend((f"{layer_name}.{p_name}", p) for p_name, p in layer.params())
        return named

    def num_params(self) -> int:
        return sum(p.size for _, p in self.params())

    def kinds(self) -> list[str]:
        return [layer.kind for _, layer in self.layers]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.params():
            if name not in state:
                raise KeyError(f"checkpoint is missing parameter {name!r}")
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise ValueError(
                    f"parameter {name!r}: checkpoint shape {value.shape} != model shape {p.data.shape}"
                )
            p.data = value.copy()


def build_model(config: ModelConfig, matrix: EmbeddingMatrix) -> Model:
    """Instantiate the architecture against an embedding matrix.

    Initialization is fully determined by ``config.seed``, so identical
    config + matrix give identical initial parameters.
    """
    specs = layer_specs(config)
    if any(s.kind == "conv1d" for s in specs) and config.max_len < config.conv_width:
        raise ValueError(
            f"conv width {config.conv_width} exceeds max_len {config.max_len}"
        )
    rng = rng_for(config.seed, "model-init", config.architecture)
    layers: list[tuple[str, object]] = []
    counts: dict[str, int] = {}
    in_dim = matrix.dim
    for spec in specs:
        layer, in_dim = build_layer(
            spec, in_dim, rng,
            matrix=matrix.rows if spec.kind == "embedding" else None,
            trainable_embeddings=config.trainable_embeddings,
        )
        n = counts.get(spec.kind, 0)
        counts[spec.kind] = n + 1
        name = spec.kind if n == 0 else f"{spec.kind}{n + 1}"
        layers.append((name, layer))
    return Model(config, layers)


def predict(model: Model, encoded) -> Prediction:
    """Module-level alias of Model.predict."""
    return model.predict(encoded)
