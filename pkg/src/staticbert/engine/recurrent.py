"""Recurrent layers: LSTM, BiLSTM, GRU, unrolled step by step.

Cell equations (x_t input, h hidden, c cell; all weights combined per gate):

LSTM (gate order i, f, g, o; forget-gate bias initialized to 1):
    i = sigmoid(x W_i + h U_i + b_i)      f = sigmoid(x W_f + h U_f + b_f)
    g = tanh   (x W_g + h U_g + b_g)      o = sigmoid(x W_o + h U_o + b_o)
    c' = f * c + i * g                    h' = o * tanh(c')

GRU (gate order z, r, n; reset gate applied before the recurrent matmul):
    z = sigmoid(x W_z + h U_z + b_z)      r = sigmoid(x W_r + h U_r + b_r)
    n = tanh(x W_n + (r * h) U_n + b_n)   h' = z * h + (1 - z) * n

Masking: on a padded step (mask 0) the state is carried through unchanged,
so trailing padding never leaks into the hidden state and the final state
is the state after the last valid token. Input kernels are Glorot-uniform,
recurrent kernels orthogonal per gate block, biases zero — all seeded.

Shape rule: (B, T, D) -> (B, H) for the final state, (B, T, H) with
``return_sequences`` (BiLSTM doubles H by concatenating directions).
"""

from __future__ import annotations

import numpy as np

from .layers import ForwardContext, Layer, ShapeError, glorot_uniform, orthogonal
from .tensor import Tensor, concat, stack


def _recurrent_kernel(rng: np.random.Generator, hidden: int, gates: int) -> np.ndarray:
    return np.hstack([orthogonal(rng, hidden) for _ in range(gates)])


class LSTM(Layer):
    kind = "lstm"

    def __init__(self, in_dim: int, units: int, return_sequences: bool = False,
                 rng: np.random.Generator | None = None, forget_bias: float = 1.0):
        if units < 1:
            raise ValueError(f"lstm units must be positive, got {units}")
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.units = units
        self.return_sequences = return_sequences
        H = units
        self.Wx = Tensor(glorot_uniform(rng, (in_dim, 4 * H), in_dim, 4 * H),
                         requires_grad=True, name="Wx")
        self.Wh = Tensor(_recurrent_kernel(rng, H, 4), requires_grad=True, name="Wh")
        bias = np.zeros(4 * H)
        bias[H:2 * H] = forget_bias
        self.b = Tensor(bias, requires_grad=True, name="b")

    def params(self):
        return [("Wx", self.Wx), ("Wh", self.Wh), ("b", self.b)]

    def step(self, x_t: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        H = self.units
        z = x_t @ self.Wx + h @ self.Wh + self.b
        i = z[:, 0:H].sigmoid()
        f = z[:, H:2 * H].sigmoid()
        g = z[:, 2 * H:3 * H].tanh()
        o = z[:, 3 * H:4 * H].sigmoid()
        c_new = f * c + i * g
        h_new = o * c_new.tanh()
        return h_new, c_new

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"lstm expects (B, T, {self.in_dim}), got {x.shape}")
        B, T = x.shape[0], x.shape[1]
        h = Tensor(np.zeros((B, self.units)))
        c = Tensor(np.zeros((B, self.units)))
        outputs = []
        for t in range(T):
            h_new, c_new = self.step(x[:, t, :], h, c)
            h, c = _carry(h_new, h, ctx.mask, t), _carry(c_new, c, ctx.mask, t)
            if self.return_sequences:
                outputs.append(h)
        if self.return_sequences:
            return stack(outputs, axis=1)
        return h


class GRU(Layer):
    kind = "gru"

    def __init__(self, in_dim: int, units: int, return_sequences: bool = False,
                 rng: np.random.Generator | None = None):
        if units < 1:
            raise ValueError(f"gru units must be positive, got {units}")
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.units = units
        self.return_sequences = return_sequences
        H = units
        self.Wx = Tensor(glorot_uniform(rng, (in_dim, 3 * H), in_dim, 3 * H),
                         requires_grad=True, name="Wx")
        self.Wh = Tensor(_recurrent_kernel(rng, H, 3), requires_grad=True, name="Wh")
        self.b = Tensor(np.zeros(3 * H), requires_grad=True, name="b")

    def params(self):
        return [("Wx", self.Wx), ("Wh", self.Wh), ("b", self.b)]

    def step(self, x_t: Tensor, h: Tensor) -> Tensor:
        H = self.units
        xz = x_t @ self.Wx
        z = (xz[:, 0:H] + h @ self.Wh[:, 0:H] + self.b[0:H]).sigmoid()
        r = (xz[:, H:2 * H] + h @ self.Wh[:, H:2 * H] + self.b[H:2 * H]).sigmoid()
        n = (xz[:, 2 * H:3 * H] + (r * h) @ self.Wh[:, 2 * H:3 * H] + self.b[2 * H:3 * H]).tanh()
        return z * h + (1.0 - z) * n

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"gru expects (B, T, {self.in_dim}), got {x.shape}")
        B, T = x.shape[0], x.shape[1]
        h = Tensor(np.zeros((B, self.units)))
        outputs = []
        for t in range(T):
            h = _carry(self.step(x[:, t, :], h), h, ctx.mask, t)
            if self.return_sequences:
                outputs.append(h)
        if self.return_sequences:
            return stack(outputs, axis=1)
        return h


class BiLSTM(Layer):
    """Two independent LSTMs over the sequence and its reverse.

    Final-state mode concatenates the two directions' last states; sequence
    mode concatenates per time step (backward outputs re-reversed first).
    """

    kind = "bilstm"

    def __init__(self, in_dim: int, units: int, return_sequences: bool = False,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.units = units
        self.return_sequences = return_sequences
        self.forward_cell = LSTM(in_dim, units, return_sequences=return_sequences, rng=rng)
        self.backward_cell = LSTM(in_dim, units, return_sequences=return_sequences, rng=rng)

    def params(self):
        named = []
        for direction, cell in (("forward", self.forward_cell), ("backward", self.backward_cell)):
            named.extend((f"{direction}.{name}", p) for name, p in cell.params())
        return named

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"bilstm expects (B, T, {self.in_dim}), got {x.shape}")
        forward_ctx = ForwardContext(train=ctx.train, rng=ctx.rng, mask=ctx.mask)
        fwd = self.forward_cell(x, forward_ctx)
        reversed_mask = None if ctx.mask is None else ctx.mask[:, ::-1]
        backward_ctx = ForwardContext(train=ctx.train, rng=ctx.rng, mask=reversed_mask)
        bwd = self.backward_cell(x[:, ::-1, :], backward_ctx)
        if self.return_sequences:
            return concat([fwd, bwd[:, ::-1, :]], axis=2)
        return concat([fwd, bwd], axis=1)


def _carry(new: Tensor, prev: Tensor, mask: np.ndarray | None, t: int) -> Tensor:
    """Keep the previous state on padded steps (mask 0)."""
    if mask is None:
        return new
    m = mask[:, t:t + 1]
    if np.all(m == 1.0):
        return new
    keep = Tensor(m)
    return new * keep + prev * Tensor(1.0 - m)
