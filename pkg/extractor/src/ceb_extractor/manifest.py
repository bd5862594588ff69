"""Extraction manifest: everything needed to reproduce a CEB file."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .normalize import NORMALIZATION_VERSION


@dataclass(frozen=True)
class ExtractionManifest:
    """Written beside every CEB file.

    ``layer`` indexes the encoder's hidden-state stack (-1 = final layer,
    0 = embedding output). ``normalization_version`` must match the
    consuming tokenizer's tag or word alignment is not guaranteed.
    """

    model: str
    corpus_path: str
    layer: int = -1
    batch_size: int = 8
    normalization_version: str = NORMALIZATION_VERSION
    dim: int | None = None

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def read(path) -> "ExtractionManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return ExtractionManifest(**json.load(fh))
