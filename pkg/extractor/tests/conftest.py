import csv
import random
from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

# Wordpieces for the fixture vocabulary; several corpus words split into
# two pieces on purpose ("sunlight", "rainbow", "moonrise").
VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "is", "was", "and", "it", "very", "today", "tonight",
    "sun", "rain", "moon", "wind", "light", "sky", "cloud", "storm",
    "bright", "warm", "cold", "soft", "clear", "dark", "gentle",
    "falls", "blows", "rises", "sets", "comes", "goes", "shines",
    "day", "night", "morning", "evening", "after", "before",
    "don", "t", "'",
    "##light", "##bow", "##rise", "##s", "##ing",
]

SENTENCES = [
    "The sun is bright today.",
    "Sunlight falls on the cold morning!",
    "A rainbow comes after the rain.",
    "The moon rises and the sky is clear tonight.",
    "Moonrise was very dark and gentle.",
    "Don't go before the storm goes.",
    "The wind blows and the cloud comes.",
    "Rain falls, the day is warm.",
]


def _make_sentences(n: int = 50) -> list[str]:
    rng = random.Random(314)
    out = list(SENTENCES)
    words = ["sun", "rain", "moon", "wind", "light", "sky", "cloud", "storm",
             "bright", "warm", "cold", "soft", "clear", "dark", "sunlight",
             "rainbow", "moonrise", "day", "night", "morning", "evening"]
    glue = ["the", "a", "is", "was", "and", "it", "very", "today"]
    while len(out) < n - 1:
        n_words = rng.randint(4, 9)
        parts = []
        for i in range(n_words):
            parts.append(rng.choice(glue) if i % 3 == 2 else rng.choice(words))
        out.append(" ".join(parts).capitalize() + rng.choice([".", "!", ""]))
    # one sentence long enough to overflow the positional budget (30 pieces)
    out.append(" ".join(rng.choice(words) for _ in range(40)))
    return out[:n]


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory) -> Path:
    """A seeded, randomly initialized 768-dim BERT saved locally, with a
    WordPiece vocabulary covering the fixture corpus."""
    model_dir = tmp_path_factory.mktemp("tiny-bert")
    (model_dir / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizer(str(model_dir / "vocab.txt"), do_lower_case=True)
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(VOCAB), hidden_size=768, num_hidden_layers=2,
        num_attention_heads=4, intermediate_size=256,
        max_position_embeddings=32,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return model_dir


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("corpus") / "fixture.csv"
    rng = random.Random(99)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=";")
        writer.writerow(["comment", "isHate"])
        for sentence in _make_sentences(50):
            writer.writerow([sentence, f"{rng.uniform(0, 1):.2f}"])
    return path
