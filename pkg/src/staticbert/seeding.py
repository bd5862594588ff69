"""Deterministic seed derivation.

One global seed is the single reproducibility knob; every component that
needs randomness derives its own stream from (global seed, component labels)
via a stable cryptographic hash, so results do not depend on Python's
per-process hash randomization or on call order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: int | str) -> int:
    """Map a tuple of labels to a 64-bit seed, stably across processes."""
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(*parts: int | str) -> np.random.Generator:
    """A fresh PCG64 generator seeded from the derived seed."""
    return np.random.default_rng(derive_seed(*parts))
