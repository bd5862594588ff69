"""Contextual-to-static embedding distillation and embedding-matrix assembly.

A word that occurs in many sentences has one contextual vector per
occurrence; its static embedding is the mean of those vectors. Occurrences
arrive through the Contextual Embedding Batch (CEB) interchange file:

    line 1:        ``CEB 1 <dim>``
    every line:    ``<word>\\t<f1> <f2> ... <f_dim>``   (one per occurrence)

Words in a CEB file are post-normalization tokens (see corpus module).
The accumulator keeps a running (sum, count) per word instead of the raw
occurrence list; the mean is identical and memory stays bounded.

Static tables round-trip through the word-vector text format
(``<word> <f1> ... <f_dim>``, space-separated, one word per line), which is
also how pretrained baseline vectors (fastText/GloVe-style files) are read.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import PAD_INDEX, UNK_INDEX, Vocabulary
from .seeding import rng_for

logger = logging.getLogger(__name__)

CEB_MAGIC = "CEB"
CEB_VERSION = 1
MATRIX_MAGIC = "SBEMAT"
MATRIX_VERSION = 1

# Per-coordinate range for seeded fallback/unknown row initialization.
INIT_RANGE = 0.25

# Decimal places used when writing word-vector text files.
_EXPORT_DECIMALS = 8


class EmbeddingFormatError(ValueError):
    """Malformed CEB / word-vector / matrix file; message names the line."""


@dataclass
class ContextualAccumulator:
    """Running per-word sum and occurrence count of contextual vectors."""

    dim: int
    store: dict[str, tuple[np.ndarray, int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.store)

    def occurrences(self, word: str) -> int:
        entry = self.store.get(word)
        return 0 if entry is None else entry[1]


@dataclass
class StaticEmbeddingTable:
    """Word -> fixed vector, all of one dimensionality and finite."""

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    duplicates: int = 0  # last-wins collisions seen while loading

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class CoverageStats:
    """How each vocabulary word's matrix row was produced."""

    found: int
    oov_resolved: int
    fallback: int

    @property
    def total(self) -> int:
        return self.found + self.oov_resolved + self.fallback


@dataclass(frozen=True)
class EmbeddingMatrix:
    """(V+2) x dim row matrix aligned to a Vocabulary.

    Row 0 (padding) is all zeros; row 1 (unknown) is a seeded uniform
    vector; rows 2.. are static embeddings or OOV-initialized vectors.
    """

    rows: np.ndarray
    dim: int
    vocab_size: int
    seed: int
    coverage: CoverageStats | None = None


def accumulate(acc: ContextualAccumulator, word: str, vector) -> ContextualAccumulator:
    """Push one contextual occurrence of ``word`` into the accumulator."""
    vec = np.asarray(vector, dtype=np.float64)
    if vec.shape != (acc.dim,):
        raise ValueError(
            f"vector for {word!r} has shape {vec.shape}, accumulator dim is {acc.dim}"
        )
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"vector for {word!r} contains non-finite entries")
    entry = acc.store.get(word)
    if entry is None:
        acc.store[word] = (vec.copy(), 1)
    else:
        total, count = entry
        acc.store[word] = (total + vec, count + 1)
    return acc


def finalize(acc: ContextualAccumulator) -> StaticEmbeddingTable:
    """Mean-pool every word's accumulated occurrences into a static vector."""
    if not acc.store:
        raise ValueError("accumulator is empty; nothing to finalize")
    vectors = {word: total / count for word, (total, count) in acc.store.items()}
    return StaticEmbeddingTable(dim=acc.dim, vectors=vectors)


def greedy_prefix_splitter(table: StaticEmbeddingTable):
    """Default subword splitter: repeatedly take the longest prefix of the
    remaining word that is itself a table key; skip one character when no
    prefix matches."""

    def split(word: str) -> list[str]:
        pieces: list[str] = []
        i = 0
        while i < len(word):
            match = None
            for j in range(len(word), i, -1):
                if word[i:j] in table.vectors:
                    match = word[i:j]
                    break
            if match is None:
                i += 1
            else:
                pieces.append(match)
                i += len(match)
        return pieces

    return split


def oov_embedding(
    word: str,
    table: StaticEmbeddingTable,
    subword_splitter=None,
    seed: int = 0,
) -> np.ndarray:
    """Vector for ``word``: its table entry if present, else the average of
    its resolvable subword vectors, else a seeded-random fallback that is
    reproducible per (seed, word)."""
    vec = table.vectors.get(word)
    if vec is not None:
        return vec
    splitter = subword_splitter if subword_splitter is not None else greedy_prefix_splitter(table)
    pieces = [p for p in splitter(word) if p in table.vectors]
    if pieces:
        return np.mean([table.vectors[p] for p in pieces], axis=0)
    return fallback_vector(word, table.dim, seed)


def fallback_vector(word: str, dim: int, seed: int) -> np.ndarray:
    """Uniform [-0.25, 0.25] vector seeded by (seed, word)."""
    rng = rng_for(seed, "oov-fallback", word)
    return rng.uniform(-INIT_RANGE, INIT_RANGE, size=dim)


def build_matrix(vocab: Vocabulary, table: StaticEmbeddingTable, seed: int) -> EmbeddingMatrix:
    """Assemble the (V+2) x dim matrix for a vocabulary.

    Row 0 stays zero for masking; row 1 (unknown) is seeded-uniform; each
    word row is the table vector, an OOV subword average, or the seeded
    fallback, in that order of preference. Deterministic given the seed.
    """
    if table.dim < 1:
        raise ValueError(f"table dim must be >= 1, got {table.dim}")
    if vocab.size < 1:
        raise ValueError("vocabulary is empty")
    rows = np.zeros((vocab.size + 2, table.dim), dtype=np.float64)
    unk_rng = rng_for(seed, "unknown-row")
    rows[UNK_INDEX] = unk_rng.uniform(-INIT_RANGE, INIT_RANGE, size=table.dim)
    splitter = greedy_prefix_splitter(table)
    found = resolved = fallback = 0
    for word in vocab.words():
        index = vocab.word_to_index[word]
        if word in table.vectors:
            rows[index] = table.vectors[word]
            found += 1
            continue
        pieces = [p for p in splitter(word) if p in table.vectors]
        if pieces:
            rows[index] = np.mean([table.vectors[p] for p in pieces], axis=0)
            resolved += 1
        else:
            rows[index] = fallback_vector(word, table.dim, seed)
            fallback += 1
    assert not rows[PAD_INDEX].any()  # padding row must stay zero
    return EmbeddingMatrix(
        rows=rows,
        dim=table.dim,
        vocab_size=vocab.size,
        seed=seed,
        coverage=CoverageStats(found=found, oov_resolved=resolved, fallback=fallback),
    )


# ---------------------------------------------------------------------------
# CEB interchange format
# ---------------------------------------------------------------------------

def read_ceb_header(line: str, path="<ceb>") -> int:
    parts = line.strip().split()
    if len(parts) != 3 or parts[0] != CEB_MAGIC:
        raise EmbeddingFormatError(f"{path}: line 1: expected 'CEB 1 <dim>' header, got {line!r}")
    if parts[1] != str(CEB_VERSION):
        raise EmbeddingFormatError(f"{path}: line 1: unsupported CEB version {parts[1]!r}")
    try:
        dim = int(parts[2])
    except ValueError:
        raise EmbeddingFormatError(f"{path}: line 1: non-integer dim {parts[2]!r}") from None
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: line 1: dim must be >= 1, got {dim}")
    return dim


def iter_ceb(path):
    """Yield (word, vector) occurrences from a CEB file, streaming."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise EmbeddingFormatError(f"{path}: empty file, expected a CEB header")
        dim = read_ceb_header(header, path)
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                word, values = line.rstrip("\n").split("\t", 1)
            except ValueError:
                raise EmbeddingFormatError(
                    f"{path}: line {line_no}: expected '<word>\\t<floats>'"
                ) from None
            fields = values.split()
            if len(fields) != dim:
                raise EmbeddingFormatError(
                    f"{path}: line {line_no}: expected {dim} floats, got {len(fields)}"
                )
            try:
                vec = np.array(fields, dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(
                    f"{path}: line {line_no}: non-numeric embedding value"
                ) from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"{path}: line {line_no}: non-finite embedding value")
            yield word, vec


def distill_ceb(path) -> StaticEmbeddingTable:
    """Stream a CEB file through accumulation and mean pooling."""
    acc: ContextualAccumulator | None = None
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise EmbeddingFormatError(f"{path}: empty file, expected a CEB header")
        dim = read_ceb_header(header, path)
    acc = ContextualAccumulator(dim=dim)
    for word, vec in iter_ceb(path):
        accumulate(acc, word, vec)
    if not acc.store:
        raise EmbeddingFormatError(f"{path}: no occurrences found after the header")
    return finalize(acc)


# ---------------------------------------------------------------------------
# Word-vector text format
# ---------------------------------------------------------------------------

def load_word_vectors(path, expected_dim: int | None = None) -> StaticEmbeddingTable:
    """Parse a word-vector text file (``<word> <f1> ... <f_dim>`` lines).

    The dimensionality is inferred from the first row unless given; any row
    with a deviating dimension is rejected with its line number. Duplicate
    words resolve last-wins and are counted on the returned table.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = expected_dim
    duplicates = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            word = fields[0]
            if not word:
                raise EmbeddingFormatError(f"{path}: line {line_no}: empty word")
            values = fields[1:]
            if dim is None:
                dim = len(values)
                if dim < 1:
                    raise EmbeddingFormatError(f"{path}: line {line_no}: row has no values")
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}: line {line_no}: expected {dim} values, got {len(values)}"
                )
            try:
                vec = np.array(values, dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(
                    f"{path}: line {line_no}: non-numeric vector value"
                ) from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"{path}: line {line_no}: non-finite vector value")
            if word in vectors:
                duplicates += 1
            vectors[word] = vec
    if dim is None or not vectors:
        raise EmbeddingFormatError(f"{path}: no vector rows found")
    if duplicates:
        logger.warning("%s: %d duplicate words (last occurrence wins)", path, duplicates)
    return StaticEmbeddingTable(dim=dim, vectors=vectors, duplicates=duplicates)


def save_word_vectors(table: StaticEmbeddingTable, path) -> None:
    """Write a table in the word-vector text format (8 decimal places)."""
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in table.vectors.items():
            values = " ".join(f"{x:.{_EXPORT_DECIMALS}f}" for x in vec)
            fh.write(f"{word} {values}\n")


def concat_tables(first: StaticEmbeddingTable, second: StaticEmbeddingTable) -> StaticEmbeddingTable:
    """Concatenate two tables per word (dims add); a word missing from one
    side gets zeros for that side's coordinates."""
    dim = first.dim + second.dim
    vectors: dict[str, np.ndarray] = {}
    for word in first.vectors.keys() | second.vectors.keys():
        left = first.vectors.get(word)
        right = second.vectors.get(word)
        vec = np.zeros(dim, dtype=np.float64)
        if left is not None:
            vec[: first.dim] = left
        if right is not None:
            vec[first.dim :] = right
        vectors[word] = vec
    return StaticEmbeddingTable(dim=dim, vectors=vectors)


# ---------------------------------------------------------------------------
# Matrix dump
# ---------------------------------------------------------------------------

def save_matrix(matrix: EmbeddingMatrix, path) -> None:
    """Binary matrix dump: one ASCII header line
    ``SBEMAT 1 <rows> <dim> <seed>`` followed by the row-major float64
    payload, little-endian. Stable across platforms and versions.
    """
    with open(path, "wb") as fh:
        header = f"{MATRIX_MAGIC} {MATRIX_VERSION} {matrix.rows.shape[0]} {matrix.dim} {matrix.seed}\n"
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(matrix.rows, dtype="<f8").tobytes())


def load_matrix(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 5 or header[0] != MATRIX_MAGIC:
            raise EmbeddingFormatError(f"{path}: not a matrix dump (bad header)")
        if header[1] != str(MATRIX_VERSION):
            raise EmbeddingFormatError(f"{path}: unsupported matrix version {header[1]!r}")
        n_rows, dim, seed = int(header[2]), int(header[3]), int(header[4])
        payload = fh.read()
    expected = n_rows * dim * 8
    if len(payload) != expected:
        raise EmbeddingFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    rows = np.frombuffer(payload, dtype="<f8").reshape(n_rows, dim).astype(np.float64)
    return EmbeddingMatrix(rows=rows, dim=dim, vocab_size=n_rows - 2, seed=seed)
