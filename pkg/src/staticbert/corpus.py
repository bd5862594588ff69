"""Labeled-corpus ingestion, tokenization, vocabulary and fold planning.

The input layout is a delimiter-separated text file with a header row and
columns ``comment`` and ``isHate`` (the ETHOS binary layout; the delimiter
there is ``;``). Numeric labels are vote fractions in [0, 1] and are
binarized against a threshold: ``label >= threshold`` maps to class 1.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .seeding import rng_for

# Version tag of the normalization rules below. Any producer of word-level
# artifacts that must align with this tokenizer (e.g. a contextual-embedding
# extractor) has to normalize with the same rules and carry the same tag.
NORMALIZATION_VERSION = "norm-v1"

PAD_INDEX = 0
UNK_INDEX = 1

# Keep unicode letters, digits and the ASCII apostrophe; everything else
# (including underscore, which \w would admit) becomes a space.
_NON_TOKEN = re.compile(r"[^\w']|_")


class CorpusFormatError(ValueError):
    """Malformed corpus file; the message names the offending row."""


@dataclass(frozen=True)
class LabeledExample:
    """One cleaned sentence with its binary hate label (1 = hate)."""

    text: str
    label: int
    source_row: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class Vocabulary:
    """Bijective word <-> index mapping with reserved indices.

    Index 0 is padding (its embedding row is all zeros and is masked),
    index 1 is the unknown word. Corpus words occupy 2..V+1, ordered by
    descending corpus frequency with lexicographic tie-break, so the
    mapping is deterministic across runs.
    """

    word_to_index: dict[str, int]
    index_to_word: dict[int, str] = field(repr=False)

    @property
    def size(self) -> int:
        """Number of real words (excludes the two reserved indices)."""
        return len(self.word_to_index)

    def index_of(self, word: str) -> int:
        return self.word_to_index.get(word, UNK_INDEX)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_index

    def words(self) -> list[str]:
        """Words in index order (index 2 first)."""
        return [self.index_to_word[i] for i in range(2, self.size + 2)]


@dataclass(frozen=True)
class EncodedExample:
    """Fixed-length index sequence; padding 0 only as a trailing run."""

    indices: tuple[int, ...]
    label: int


@dataclass(frozen=True)
class BalanceReport:
    """Shannon-entropy balance of the class distribution.

    ``entropy`` is in nats (natural log). ``balance`` = H / log(k) is
    base-invariant, lies in [0, 1], and equals 1 iff all classes have the
    same size.
    """

    class_counts: tuple[int, ...]
    n: int
    k: int
    entropy: float
    balance: float


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every example index to exactly one of k folds."""

    assignments: tuple[int, ...]
    k: int
    seed: int

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def write(self, path) -> None:
        """Two-column text export: ``row_index,fold_id`` per line."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("row_index,fold_id\n")
            for i, f in enumerate(self.assignments):
                fh.write(f"{i},{f}\n")


def load_corpus(path, delimiter: str = ";", label_threshold: float = 0.5) -> list[LabeledExample]:
    """Read labeled sentences from a delimited text file.

    Expects a header row with ``comment`` and ``isHate`` columns. The numeric
    label is binarized: values >= ``label_threshold`` become 1. Row order is
    preserved; ``source_row`` is the ordinal of the data row (header = row 0).
    """
    examples: list[LabeledExample] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusFormatError(f"{path}: empty file, expected a header row") from None
        header = [h.strip().lstrip("﻿") for h in header]
        try:
            text_col = header.index("comment")
            label_col = header.index("isHate")
        except ValueError:
            raise CorpusFormatError(
                f"{path}: header must contain 'comment' and 'isHate', got {header!r}"
            ) from None
        for row_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) <= max(text_col, label_col):
                raise CorpusFormatError(
                    f"{path}: row {row_no}: expected {len(header)} columns, got {len(row)}"
                )
            raw_label = row[label_col].strip()
            try:
                value = float(raw_label)
            except ValueError:
                raise CorpusFormatError(
                    f"{path}: row {row_no}: non-numeric label {raw_label!r}"
                ) from None
            if math.isnan(value):
                raise CorpusFormatError(f"{path}: row {row_no}: non-numeric label {raw_label!r}")
            examples.append(
                LabeledExample(
                    text=row[text_col],
                    label=1 if value >= label_threshold else 0,
                    source_row=row_no,
                )
            )
    return examples


def normalize_and_tokenize(text: str) -> list[str]:
    """Lowercase, map every non letter/digit/apostrophe character to a
    space, and split on whitespace runs. Empty tokens are dropped, so
    punctuation-only input yields an empty list.
    """
    cleaned = _NON_TOKEN.sub(" ", text.lower())
    return cleaned.split()


def build_vocabulary(corpus: list[LabeledExample]) -> Vocabulary:
    """Index every corpus token, most frequent first (ties lexicographic)."""
    counts: Counter[str] = Counter()
    for example in corpus:
        counts.update(normalize_and_tokenize(example.text))
    if not counts:
        raise ValueError("corpus yields zero tokens; cannot build a vocabulary")
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    word_to_index = {word: i for i, (word, _) in enumerate(ordered, start=2)}
    index_to_word = {i: w for w, i in word_to_index.items()}
    return Vocabulary(word_to_index=word_to_index, index_to_word=index_to_word)


def encode(example: LabeledExample, vocab: Vocabulary, max_len: int) -> EncodedExample:
    """Map tokens to indices (unknown -> 1), truncate or right-pad to
    exactly ``max_len``."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    indices = [vocab.index_of(tok) for tok in normalize_and_tokenize(example.text)]
    indices = indices[:max_len]
    indices += [PAD_INDEX] * (max_len - len(indices))
    return EncodedExample(indices=tuple(indices), label=example.label)


def encode_corpus(
    corpus: list[LabeledExample], vocab: Vocabulary, max_len: int
) -> tuple[np.ndarray, np.ndarray]:
    """Encode all examples into an (N, max_len) int index matrix and an
    (N,) label vector."""
    encoded = [encode(ex, vocab, max_len) for ex in corpus]
    X = np.array([e.indices for e in encoded], dtype=np.int64)
    y = np.array([e.label for e in encoded], dtype=np.int64)
    return X, y


def balance(class_counts: list[int]) -> BalanceReport:
    """Normalized Shannon entropy of the class distribution.

    H = -sum (c_i/n) log(c_i/n) in nats, with 0 log 0 = 0; balance = H/log k.
    Requires at least two classes (log 1 = 0 makes the ratio undefined).
    """
    counts = tuple(int(c) for c in class_counts)
    k = len(counts)
    if k < 2:
        raise ValueError(f"balance needs at least 2 classes, got k={k}")
    if any(c < 0 for c in counts):
        raise ValueError(f"class counts must be nonnegative, got {counts}")
    n = sum(counts)
    if n < 1:
        raise ValueError("balance needs at least one instance")
    entropy = 0.0
    for c in counts:
        if c > 0:
            p = c / n
            entropy -= p * math.log(p)
    return BalanceReport(
        class_counts=counts, n=n, k=k, entropy=entropy, balance=entropy / math.log(k)
    )


def balance_of_corpus(corpus: list[LabeledExample]) -> BalanceReport:
    """Balance report over the two binary classes of a loaded corpus."""
    counts = Counter(ex.label for ex in corpus)
    if len(counts) < 2:
        raise ValueError(
            f"corpus has a single class (label {next(iter(counts))}); balance undefined"
        )
    ordered = [counts[label] for label in sorted(counts)]
    return balance(ordered)


def stratified_folds(labels, k: int, seed: int) -> FoldPlan:
    """Assign each example to one of ``k`` folds, preserving per-class
    proportions within +/- 1 example per class per fold.

    Members of each class are shuffled by a seeded permutation and dealt
    round-robin, so the plan is deterministic given the seed.
    """
    labels = list(labels)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    by_class: dict[int, list[int]] = {}
    for i, label in enumerate(labels):
        by_class.setdefault(label, []).append(i)
    for label, members in sorted(by_class.items()):
        if len(members) < k:
            raise ValueError(
                f"class {label} has {len(members)} members, fewer than k={k}; "
                "stratification infeasible"
            )
    assignments = [0] * len(labels)
    rng = rng_for(seed, "stratified-folds", k)
    for label, members in sorted(by_class.items()):
        order = rng.permutation(len(members))
        for j, pos in enumerate(order):
            assignments[members[pos]] = j % k
    return FoldPlan(assignments=tuple(assignments), k=k, seed=seed)
