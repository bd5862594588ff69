"""Binary cross-entropy, in scalar closed form and as a graph op.

Predictions are clamped to [eps, 1 - eps] (eps = 1e-7) before the logs;
inside the clamp the gradient is the analytic (p - y) / (p (1 - p)).
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor

EPSILON = 1e-7


def binary_cross_entropy(prediction: float, label: int) -> tuple[float, float]:
    """Loss and d(loss)/d(prediction) for one (probability, label) pair.

    The gradient is zero where the clamp is active, matching the graph op.
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    p = min(max(float(prediction), EPSILON), 1.0 - EPSILON)
    loss = -(label * math.log(p) + (1 - label) * math.log(1.0 - p))
    if prediction <= EPSILON or prediction >= 1.0 - EPSILON:
        grad = 0.0
    else:
        grad = (p - label) / (p * (1.0 - p))
    return loss, grad


def bce_loss(predictions: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy over a batch, as a differentiable scalar.

    ``predictions`` is (B,) or (B, 1) of probabilities; ``labels`` an array
    of {0, 1}.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    p = predictions.reshape(y.shape[0]).clip(EPSILON, 1.0 - EPSILON)
    y_t = Tensor(y)
    losses = -(y_t * p.log() + (1.0 - y_t) * (1.0 - p).log())
    return losses.mean()
