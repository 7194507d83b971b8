from __future__ import annotations

import numpy as np
import pytest

from anchordiff import (
    AnchorConfig,
    AnchorStrategy,
    EmptyCorpusError,
    IngestError,
    annotate_program,
    build_vocab,
    dataset_from_jsonl,
    dataset_to_jsonl,
    ingest,
    load_dataset,
    pad_id,
    save_dataset,
    synth_corpus,
    tokenize,
)
from anchordiff.corpus_io import encode_tokens
from anchordiff.minilang import MASK_SURFACE, PAD_SURFACE, is_syntactically_valid


CFG = AnchorConfig.for_strategy(AnchorStrategy.ANCHOR_TREE)


class TestVocab:
    def test_example_vocabulary(self):
        vocab = build_vocab(["x = 1"])
        assert vocab.tokens == ("1", "=", "x", PAD_SURFACE, MASK_SURFACE)
        assert vocab.size == 5
        assert vocab.mask_id == 4

    def test_duplicates_counted_once(self):
        assert build_vocab(["x x x"]).tokens == ("x", PAD_SURFACE, MASK_SURFACE)

    def test_mask_is_last(self, synth_sources):
        vocab = build_vocab(synth_sources)
        assert vocab.tokens[-1] == MASK_SURFACE
        assert vocab.surface(vocab.mask_id) == MASK_SURFACE

    def test_deterministic(self, synth_sources):
        assert build_vocab(synth_sources).tokens == build_vocab(synth_sources).tokens

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpusError):
            build_vocab([])

    def test_mask_sentinel_is_unparseable(self):
        assert not is_syntactically_valid("x = ?")
        assert not is_syntactically_valid("?")


class TestEncode:
    def test_truncate_and_pad(self):
        vocab = build_vocab(["x = 1"])
        toks = tokenize("x = 1")
        ids = encode_tokens(toks, vocab, 5)
        assert ids.tolist() == [
            vocab.id("x"), vocab.id("="), vocab.id("1"),
            pad_id(vocab), pad_id(vocab),
        ]
        assert encode_tokens(toks, vocab, 2).tolist() == [
            vocab.id("x"), vocab.id("="),
        ]

    def test_corpus_arrays_aligned(self, synth_corpus_built):
        corpus = synth_corpus_built
        assert corpus.ids.shape == corpus.omega.shape == corpus.eta.shape
        # padding carries no anchor weight and depth -1
        pads = corpus.ids == pad_id(corpus.vocab)
        assert not corpus.omega[pads].any()
        assert (corpus.depth[pads] == -1).all()


class TestIngest:
    def test_directory_roundtrip(self, tmp_path, synth_sources):
        for i, src in enumerate(synth_sources[:5]):
            (tmp_path / f"p{i}.mini").write_text(src)
        (tmp_path / "broken.mini").write_text("def f(:")
        result = ingest([tmp_path], CFG)
        assert len(result.records) == 5
        assert len(result.skipped) == 1
        assert "broken.mini" in result.skipped[0][0]

    def test_missing_path_raises(self):
        with pytest.raises(IngestError):
            ingest(["/nonexistent/path"], CFG)


class TestSerialization:
    def test_round_trip_bit_exact(self, synth_records):
        payload = dataset_to_jsonl(synth_records[:10], CFG)
        records, config = dataset_from_jsonl(payload)
        assert config == CFG
        assert dataset_to_jsonl(records, config) == payload

    def test_file_round_trip(self, tmp_path, synth_records):
        path = tmp_path / "data.jsonl"
        save_dataset(path, synth_records[:4], CFG)
        records, config = load_dataset(path)
        again = tmp_path / "again.jsonl"
        save_dataset(again, records, config)
        assert path.read_bytes() == again.read_bytes()

    def test_reloaded_records_match(self, synth_records):
        payload = dataset_to_jsonl(synth_records[:3], CFG)
        records, _ = dataset_from_jsonl(payload)
        for orig, back in zip(synth_records, records):
            assert back.source == orig.source
            assert back.tokens == orig.tokens
            assert [a.node_id for a in back.annotations] == [
                a.node_id for a in orig.annotations
            ]
            assert np.array_equal(back.omega, orig.omega)
            assert np.array_equal(back.eta, orig.eta)

    def test_rejects_foreign_payload(self):
        with pytest.raises(IngestError):
            dataset_from_jsonl('{"schema": "something-else", "version": 1}\n')


class TestSynthCorpus:
    def test_all_programs_valid(self, synth_sources):
        assert all(is_syntactically_valid(s) for s in synth_sources)

    def test_seed_determinism(self):
        a = synth_corpus(seed=5, n_programs=20, max_depth=6)
        b = synth_corpus(seed=5, n_programs=20, max_depth=6)
        assert a == b
        c = synth_corpus(seed=6, n_programs=20, max_depth=6)
        assert a != c

    def test_depth_fixture(self):
        # Pinned on the shipped generator: half the tokens sit deeper than
        # d0 = 2 at max_depth 6 (fixture requires >= 30%).
        sources = synth_corpus(seed=20260809, n_programs=200, max_depth=6)
        records = [annotate_program(s, CFG, str(i)) for i, s in enumerate(sources)]
        deep = sum(1 for r in records for a in r.annotations if a.depth > 2)
        total = sum(len(r) for r in records)
        assert deep / total >= 0.30
        assert deep / total == pytest.approx(0.501, abs=0.02)

    def test_depth_coverage(self, synth_records):
        depths = {a.depth for r in synth_records for a in r.annotations}
        assert depths >= {0, 1, 2, 3, 4, 5, 6}

    def test_min_depth_guard(self):
        with pytest.raises(ValueError):
            synth_corpus(seed=0, n_programs=1, max_depth=2)

    def test_single_shared_token_length(self, synth_sources):
        lengths = {len(tokenize(s)) for s in synth_sources}
        assert len(lengths) == 1

    def test_fits_target_length(self, synth_sources):
        assert max(len(tokenize(s)) for s in synth_sources) <= 64
