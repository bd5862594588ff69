"""Run a pretrained encoder over a corpus and emit word-level CEB lines.

Alignment strategy: each sentence is normalized into words first, every
word is wordpiece-tokenized on its own, and the piece spans are tracked
through the encoder, so a word's vector is exactly the mean of its pieces'
hidden states. This guarantees the CEB vocabulary is a subset of what the
consuming tokenizer produces for the same corpus.

Sentences whose pieces exceed the encoder's positional budget are split
into non-overlapping chunks at word boundaries; each chunk is encoded
independently (with its own [CLS]/[SEP]).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import torch

from .manifest import ExtractionManifest
from .normalize import normalize_and_tokenize

# CEB lines carry this many decimals; float32 hidden states keep ~7
# significant digits, so 6 decimals loses nothing meaningful.
_CEB_DECIMALS = 6
_DEBUG_DECIMALS = 8


@dataclass(frozen=True)
class ExtractionSummary:
    sentences: int
    occurrences: int
    skipped_words: int
    vocabulary: int
    chunks: int
    dim: int

    @property
    def skip_rate(self) -> float:
        total = self.occurrences + self.skipped_words
        return 0.0 if total == 0 else self.skipped_words / total


@dataclass(frozen=True)
class _Chunk:
    sentence: int
    words: list  # (word, piece_ids list)


def load_corpus_texts(path, delimiter: str = ";") -> list[str]:
    """The text column of a ``comment``/``isHate`` delimited file."""
    texts: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty corpus file")
        header = [h.strip().lstrip("﻿") for h in header]
        try:
            text_col = header.index("comment")
        except ValueError:
            raise ValueError(f"{path}: header must contain a 'comment' column") from None
        for row in reader:
            if row and len(row) > text_col:
                texts.append(row[text_col])
    return texts


def _chunk_sentence(words_with_pieces, budget: int, sentence: int) -> list[_Chunk]:
    chunks: list[_Chunk] = []
    current: list = []
    used = 0
    for word, piece_ids in words_with_pieces:
        piece_ids = piece_ids[:budget]  # a single oversized word is truncated
        if used + len(piece_ids) > budget and current:
            chunks.append(_Chunk(sentence=sentence, words=current))
            current, used = [], 0
        current.append((word, piece_ids))
        used += len(piece_ids)
    if current:
        chunks.append(_Chunk(sentence=sentence, words=current))
    return chunks


def extract(corpus_path, out_ceb_path, manifest: ExtractionManifest,
            delimiter: str = ";", debug_dump_path=None) -> ExtractionSummary:
    """Write one CEB line per word occurrence; returns summary counts.

    The manifest's model may be a local directory or a hub name that is
    already cached. Inference runs on CPU in eval mode under ``no_grad``,
    so re-running with the same manifest reproduces the file byte for byte.
    """
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(manifest.model)
    model = AutoModel.from_pretrained(manifest.model)
    model.eval()
    dim = model.config.hidden_size
    budget = model.config.max_position_embeddings - 2
    cls_id = tokenizer.cls_token_id
    sep_id = tokenizer.sep_token_id
    pad_id = tokenizer.pad_token_id

    texts = load_corpus_texts(corpus_path, delimiter=delimiter)
    chunks: list[_Chunk] = []
    skipped = 0
    for sentence_idx, text in enumerate(texts):
        words_with_pieces = []
        for word in normalize_and_tokenize(text):
            pieces = tokenizer.tokenize(word)
            if not pieces:
                skipped += 1
                continue
            words_with_pieces.append((word, tokenizer.convert_tokens_to_ids(pieces)))
        chunks.extend(_chunk_sentence(words_with_pieces, budget, sentence_idx))

    occurrences = 0
    vocabulary: set[str] = set()
    debug_fh = open(debug_dump_path, "w", encoding="utf-8") if debug_dump_path else None
    try:
        with open(out_ceb_path, "w", encoding="utf-8") as out:
            out.write(f"CEB 1 {dim}\n")
            for start in range(0, len(chunks), manifest.batch_size):
                batch = chunks[start:start + manifest.batch_size]
                hidden = _encode_batch(model, batch, manifest.layer, cls_id, sep_id, pad_id)
                for chunk, states in zip(batch, hidden):
                    offset = 1  # skip [CLS]
                    for word, piece_ids in chunk.words:
                        span = states[offset:offset + len(piece_ids)]
                        offset += len(piece_ids)
                        vector = span.mean(axis=0)
                        values = " ".join(f"{x:.{_CEB_DECIMALS}f}" for x in vector)
                        out.write(f"{word}\t{values}\n")
                        occurrences += 1
                        vocabulary.add(word)
                        if debug_fh is not None:
                            debug_fh.write(json.dumps({
                                "word": word,
                                "pieces": tokenizer.convert_ids_to_tokens(piece_ids),
                                "piece_vectors": [
                                    [round(float(v), _DEBUG_DECIMALS) for v in row]
                                    for row in span
                                ],
                            }) + "\n")
    finally:
        if debug_fh is not None:
            debug_fh.close()

    return ExtractionSummary(
        sentences=len(texts), occurrences=occurrences, skipped_words=skipped,
        vocabulary=len(vocabulary), chunks=len(chunks), dim=dim,
    )


def _encode_batch(model, batch: list[_Chunk], layer: int,
                  cls_id: int, sep_id: int, pad_id: int) -> list[np.ndarray]:
    sequences = []
    for chunk in batch:
        ids = [cls_id]
        for _, piece_ids in chunk.words:
            ids.extend(piece_ids)
        ids.append(sep_id)
        sequences.append(ids)
    width = max(len(s) for s in sequences)
    input_ids = torch.full((len(sequences), width), pad_id, dtype=torch.long)
    attention = torch.zeros((len(sequences), width), dtype=torch.long)
    for i, seq in enumerate(sequences):
        input_ids[i, :len(seq)] = torch.tensor(seq, dtype=torch.long)
        attention[i, :len(seq)] = 1
    with torch.no_grad():
        output = model(input_ids=input_ids, attention_mask=attention,
                       output_hidden_states=True)
    states = output.hidden_states[layer]
    return [states[i, :len(seq)].numpy().astype(np.float64)
            for i, seq in enumerate(sequences)]
