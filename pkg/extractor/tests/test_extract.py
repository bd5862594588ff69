import json

import numpy as np
import pytest

from ceb_extractor.extract import ExtractionSummary, _chunk_sentence, extract
from ceb_extractor.manifest import ExtractionManifest
from ceb_extractor.normalize import normalize_and_tokenize
from ceb_extractor.verify import verify_ceb


def read_ceb(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        dim = int(header[2])
        rows = []
        for line in fh:
            word, values = line.rstrip("\n").split("\t")
            rows.append((word, np.array(values.split(), dtype=float)))
    return dim, rows


@pytest.fixture(scope="module")
def extraction(tiny_bert_dir, fixture_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("extraction")
    manifest = ExtractionManifest(model=str(tiny_bert_dir),
                                  corpus_path=str(fixture_corpus))
    summary = extract(fixture_corpus, out / "corpus.ceb", manifest,
                      debug_dump_path=out / "debug.jsonl")
    return out, summary


class TestExtract:
    def test_summary_counts(self, extraction, fixture_corpus):
        _, summary = extraction
        assert summary.sentences == 50
        assert summary.skipped_words == 0
        assert summary.dim == 768
        with open(fixture_corpus, encoding="utf-8") as fh:
            next(fh)
            total_words = sum(
                len(normalize_and_tokenize(line.rsplit(";", 1)[0])) for line in fh
            )
        assert summary.occurrences == total_words

    def test_header_dim_is_768(self, extraction):
        out, _ = extraction
        dim, rows = read_ceb(out / "corpus.ceb")
        assert dim == 768
        assert all(vec.shape == (768,) for _, vec in rows)

    def test_repeated_word_gets_distinct_contextual_vectors(self, extraction):
        out, _ = extraction
        _, rows = read_ceb(out / "corpus.ceb")
        by_word = {}
        for word, vec in rows:
            by_word.setdefault(word, []).append(vec)
        repeated = {w: vs for w, vs in by_word.items() if len(vs) >= 2}
        assert repeated, "fixture must repeat words"
        distinct = 0
        for vectors in repeated.values():
            if not np.allclose(vectors[0], vectors[1], atol=1e-9):
                distinct += 1
        assert distinct > 0  # same word, different sentence positions

    def test_vocabulary_is_subset_of_normalized_tokens(self, extraction, fixture_corpus):
        out, _ = extraction
        _, rows = read_ceb(out / "corpus.ceb")
        corpus_tokens = set()
        with open(fixture_corpus, encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                corpus_tokens |= set(normalize_and_tokenize(line.rsplit(";", 1)[0]))
        assert {w for w, _ in rows} <= corpus_tokens

    def test_subword_merge_matches_debug_dump(self, extraction):
        # oracle: a word's CEB vector is the mean of its dumped piece vectors
        out, _ = extraction
        _, rows = read_ceb(out / "corpus.ceb")
        checked_multi = 0
        with open(out / "debug.jsonl", encoding="utf-8") as fh:
            for (word, ceb_vec), line in zip(rows, fh):
                record = json.loads(line)
                assert record["word"] == word
                pieces = np.array(record["piece_vectors"], dtype=float)
                assert len(record["pieces"]) == pieces.shape[0]
                np.testing.assert_allclose(ceb_vec, pieces.mean(axis=0), atol=1e-6)
                if pieces.shape[0] >= 2:
                    checked_multi += 1
        assert checked_multi > 0  # split words ("sunlight" etc.) were exercised

    def test_verify_accepts_output(self, extraction):
        out, _ = extraction
        report = verify_ceb(out / "corpus.ceb")
        assert report.ok, report.errors

    def test_rerun_is_byte_identical(self, extraction, tiny_bert_dir, fixture_corpus, tmp_path):
        out, _ = extraction
        manifest = ExtractionManifest(model=str(tiny_bert_dir),
                                      corpus_path=str(fixture_corpus))
        extract(fixture_corpus, tmp_path / "again.ceb", manifest)
        assert (tmp_path / "again.ceb").read_bytes() == (out / "corpus.ceb").read_bytes()

    def test_layer_selection_changes_vectors(self, extraction, tiny_bert_dir, fixture_corpus, tmp_path):
        out, _ = extraction
        manifest = ExtractionManifest(model=str(tiny_bert_dir),
                                      corpus_path=str(fixture_corpus), layer=0)
        extract(fixture_corpus, tmp_path / "layer0.ceb", manifest)
        _, last = read_ceb(out / "corpus.ceb")
        _, embed = read_ceb(tmp_path / "layer0.ceb")
        assert not np.allclose(last[0][1], embed[0][1], atol=1e-6)


class TestChunking:
    def test_budget_respected(self):
        words = [(f"w{i}", [7, 8]) for i in range(20)]  # 40 pieces total
        chunks = _chunk_sentence(words, budget=12, sentence=0)
        assert len(chunks) == 4
        for chunk in chunks:
            assert sum(len(p) for _, p in chunk.words) <= 12
        flat = [w for chunk in chunks for w, _ in chunk.words]
        assert flat == [w for w, _ in words]  # no overlap, nothing lost

    def test_oversized_word_truncated(self):
        chunks = _chunk_sentence([("huge", list(range(50)))], budget=10, sentence=0)
        assert len(chunks) == 1
        assert len(chunks[0].words[0][1]) == 10

    def test_long_sentence_covers_all_words(self, extraction, fixture_corpus):
        # the 40-word fixture sentence exceeds the 30-piece budget
        _, summary = extraction
        assert summary.chunks > summary.sentences


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = ExtractionManifest(model="m", corpus_path="c", layer=-1,
                                      batch_size=4, dim=768)
        manifest.write(tmp_path / "m.json")
        assert ExtractionManifest.read(tmp_path / "m.json") == manifest

    def test_normalization_tag_default(self):
        assert ExtractionManifest(model="m", corpus_path="c").normalization_version == "norm-v1"
