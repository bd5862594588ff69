"""Self-describing parameter dumps.

Layout (all integers ASCII in the header lines, payload little-endian
float64, C order):

    line 1:  ``SBECKPT 1 <seed> <n_params>``
    then, per parameter:
        one ASCII line ``<name> <ndim> <d0> <d1> ...``
        followed by the raw values (8 * prod(shape) bytes)

Names may not contain whitespace or newlines; layer/parameter names used by
the models ("dense.W", "bilstm.forward.Wx", ...) satisfy this.
"""

from __future__ import annotations

import numpy as np

MAGIC = "SBECKPT"
VERSION = 1


class CheckpointFormatError(ValueError):
    pass


def save_params(path, named_params, seed: int = 0) -> None:
    """Write (name, Tensor-or-array) pairs to a checkpoint file."""
    items = [(name, np.asarray(getattr(p, "data", p), dtype=np.float64)) for name, p in named_params]
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} {VERSION} {seed} {len(items)}\n".encode("ascii"))
        for name, data in items:
            if any(ch.isspace() for ch in name):
                raise ValueError(f"parameter name {name!r} contains whitespace")
            dims = " ".join(str(d) for d in data.shape)
            fh.write(f"{name} {data.ndim}{' ' + dims if dims else ''}\n".encode("utf-8"))
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def load_params(path) -> tuple[dict[str, np.ndarray], int]:
    """Read a checkpoint; returns ({name: array}, seed)."""
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 4 or header[0] != MAGIC:
            raise CheckpointFormatError(f"{path}: not a checkpoint file (bad header)")
        if header[1] != str(VERSION):
            raise CheckpointFormatError(f"{path}: unsupported version {header[1]!r}")
        seed, count = int(header[2]), int(header[3])
        for _ in range(count):
            meta = fh.readline().decode("utf-8").split()
            if len(meta) < 2:
                raise CheckpointFormatError(f"{path}: truncated parameter header")
            name, ndim = meta[0], int(meta[1])
            shape = tuple(int(d) for d in meta[2:2 + ndim])
            if len(shape) != ndim:
                raise CheckpointFormatError(f"{path}: bad shape for {name!r}")
            n_bytes = 8 * int(np.prod(shape)) if shape else 8
            raw = fh.read(n_bytes)
            if len(raw) != n_bytes:
                raise CheckpointFormatError(f"{path}: truncated payload for {name!r}")
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return out, seed
