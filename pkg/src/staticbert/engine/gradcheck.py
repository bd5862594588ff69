"""Finite-difference verification of reverse-mode gradients.

Every parameter coordinate is perturbed by +/- h (central differences) and
the numeric slope is compared against the backpropagated gradient. The
forward pass must be deterministic across evaluations, so models are run
with a freshly re-seeded dropout stream on every call.
"""

from __future__ import annotations

import numpy as np

from .losses import bce_loss
from .tensor import Tensor


class GradientCheckError(AssertionError):
    """Max relative error between analytic and numeric gradients exceeded
    the tolerance; the message names the worst parameter."""


def relative_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def grad_check(model, inputs, labels, tolerance: float = 1e-4, h: float = 1e-5,
               train: bool = False, rng_seed: int = 0, grad_hook=None) -> float:
    """Compare reverse-mode gradients of the model's BCE loss against
    central finite differences over every parameter.

    Returns the max relative error; raises GradientCheckError when it
    exceeds ``tolerance``. ``grad_hook(named_grads)`` may mutate the
    analytic gradients first (a corruption hook for harness sanity tests).
    """
    inputs = np.asarray(inputs)
    if inputs.size == 0:
        raise ValueError(f"gradient check needs a non-empty input, got shape {inputs.shape}")

    def loss_value() -> float:
        rng = np.random.default_rng(rng_seed)
        out = model.forward(inputs, train=train, rng=rng)
        return bce_loss(out, labels).item()

    rng = np.random.default_rng(rng_seed)
    out = model.forward(inputs, train=train, rng=rng)
    loss = bce_loss(out, labels)
    if not np.isfinite(loss.item()):
        raise ValueError(f"loss is non-finite ({loss.item()}); cannot gradient-check")
    for _, p in model.params():
        p.zero_grad()
    loss.backward()

    analytic = {name: (np.array(p.grad) if p.grad is not None else np.zeros_like(p.data))
                for name, p in model.params()}
    if grad_hook is not None:
        grad_hook(analytic)

    worst = 0.0
    worst_name = ""
    for name, p in model.params():
        flat = p.data.reshape(-1)
        grads = analytic[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = loss_value()
            flat[i] = original - h
            minus = loss_value()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            err = relative_error(grads[i], numeric)
            if err > worst:
                worst = err
                worst_name = f"{name}[{i}]"
    if worst > tolerance:
        raise GradientCheckError(
            f"max relative gradient error {worst:.3e} at {worst_name} exceeds {tolerance:.1e}"
        )
    return worst
