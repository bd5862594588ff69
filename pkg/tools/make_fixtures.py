#!/usr/bin/env python3
"""Regenerate the committed data fixtures.

Everything here is deterministic (stdlib Mersenne Twister with fixed seeds),
so re-running the script reproduces the files byte for byte.

Fixtures:

- data/ethos_binary_synthetic.csv
    A stand-in corpus with the ETHOS binary file layout (';'-delimited,
    header ``comment;isHate``) and the same size and class split as the
    real corpus: 998 rows, 433 with vote fraction >= 0.5 (three of them at
    exactly 0.5) and 565 below. The text is machine-generated placeholder
    English with mild negative/neutral tone markers, not real comments, so
    nothing offensive ships with the repo. Use the real dataset for any
    substantive experiment; this file exists so the pipeline and its tests
    run end to end offline.

- data/smoke_corpus.csv
    40 short separable rows (20 per class) for fast CLI smoke runs.

- data/smoke_table.txt
    A dim-16 word-vector table covering the smoke corpus vocabulary, with
    class-informative directions so tiny training runs can learn.
"""

from __future__ import annotations

import csv
import math
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from staticbert.corpus import build_vocabulary, load_corpus  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

NEGATIVE_WORDS = [
    "awful", "terrible", "trash", "garbage", "stupid", "idiots", "losers",
    "pathetic", "disgusting", "worthless", "horrible", "dumb", "useless",
    "clowns", "morons", "failures", "vile", "rotten", "miserable", "nasty",
]
NEGATIVE_TARGETS = [
    "those people", "that group", "these folks", "them all", "that crowd",
    "everyone like that", "that whole lot", "people like them",
]
NEGATIVE_OPENERS = [
    "honestly", "i swear", "can't stand how", "it's obvious that",
    "everyone knows", "don't tell me", "no wonder",
]
NEUTRAL_WORDS = [
    "interesting", "helpful", "great", "decent", "thoughtful", "honest",
    "friendly", "reasonable", "calm", "fair", "kind", "clear", "useful",
    "balanced", "detailed", "careful", "relevant", "practical", "solid",
]
NEUTRAL_TOPICS = [
    "the video", "this article", "the discussion", "your point", "the game",
    "that recipe", "the tutorial", "this channel", "the update", "the review",
    "the café playlist", "the naïve approach",
]
NEUTRAL_OPENERS = [
    "thanks for sharing", "i think", "to be fair", "in my view",
    "good point about", "i watched", "we discussed", "it's worth noting",
]
FILLERS = [
    "really", "just", "always", "never", "again", "today", "here", "online",
    "everywhere", "lately", "still", "though", "maybe", "probably",
]
PUNCT = ["", ".", "!", "...", "?", ","]


def _sentence(rng: random.Random, hateful: bool) -> str:
    if hateful:
        opener = rng.choice(NEGATIVE_OPENERS)
        target = rng.choice(NEGATIVE_TARGETS)
        words = rng.sample(NEGATIVE_WORDS, k=rng.randint(2, 4))
        parts = [opener, target, "are", words[0]]
        if len(words) > 1:
            parts += ["and", words[1]]
        for w in words[2:]:
            parts += [rng.choice(FILLERS), w]
    else:
        opener = rng.choice(NEUTRAL_OPENERS)
        topic = rng.choice(NEUTRAL_TOPICS)
        words = rng.sample(NEUTRAL_WORDS, k=rng.randint(2, 4))
        parts = [opener, topic, "was", words[0]]
        if len(words) > 1:
            parts += ["and", words[1]]
        for w in words[2:]:
            parts += [rng.choice(FILLERS), w]
    parts += rng.sample(FILLERS, k=rng.randint(0, 3))
    text = " ".join(parts) + rng.choice(PUNCT)
    if rng.random() < 0.05:
        text += "; seriously" if hateful else "; cheers"
    return text[0].upper() + text[1:]


def make_ethos_synthetic(path: Path) -> None:
    rng = random.Random(20240917)
    rows: list[tuple[str, str]] = []
    for i in range(433):
        if i < 3:
            fraction = 0.5  # exercises the >= threshold boundary
        else:
            fraction = round(rng.uniform(0.51, 1.0), 2)
        rows.append((_sentence(rng, hateful=True), f"{fraction:g}"))
    for _ in range(565):
        fraction = round(rng.uniform(0.0, 0.49), 2)
        rows.append((_sentence(rng, hateful=False), f"{fraction:g}"))
    rng.shuffle(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=";")
        writer.writerow(["comment", "isHate"])
        writer.writerows(rows)


def make_smoke_corpus(path: Path) -> None:
    rng = random.Random(7321)
    rows = []
    for _ in range(20):
        rows.append((_sentence(rng, hateful=True), f"{rng.uniform(0.6, 1.0):.2f}"))
        rows.append((_sentence(rng, hateful=False), f"{rng.uniform(0.0, 0.4):.2f}"))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=";")
        writer.writerow(["comment", "isHate"])
        writer.writerows(rows)


def make_smoke_table(corpus_path: Path, out_path: Path, dim: int = 16) -> None:
    rng = random.Random(5150)
    corpus = load_corpus(corpus_path)
    vocab = build_vocabulary(corpus)
    negative = {w for w in NEGATIVE_WORDS + [t for t in " ".join(NEGATIVE_TARGETS).split()]}
    neutral = {w for w in NEUTRAL_WORDS}
    direction = [rng.uniform(-0.6, 0.6) for _ in range(dim)]
    norm = math.sqrt(sum(d * d for d in direction))
    direction = [d / norm for d in direction]
    with open(out_path, "w", encoding="utf-8") as fh:
        for word in vocab.words():
            if word in negative:
                center = [0.8 * d for d in direction]
            elif word in neutral:
                center = [-0.8 * d for d in direction]
            else:
                center = [0.0] * dim
            vec = [c + rng.gauss(0.0, 0.12) for c in center]
            fh.write(word + " " + " ".join(f"{x:.8f}" for x in vec) + "\n")


def main() -> None:
    DATA.mkdir(exist_ok=True)
    make_ethos_synthetic(DATA / "ethos_binary_synthetic.csv")
    make_smoke_corpus(DATA / "smoke_corpus.csv")
    make_smoke_table(DATA / "smoke_corpus.csv", DATA / "smoke_table.txt")
    print("fixtures written to", DATA)


if __name__ == "__main__":
    main()
