"""Exported files must load through the retrieval engine unchanged.

The engine package is a test-time dependency only; nothing in embed_export
imports it. These tests skip when it is not installed.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

contrascope = pytest.importorskip("contrascope")

from embed_export import ExportJob, export_embeddings


class OrthoEncoder:
    """Rows from a seeded random rotation, one per text, d=48."""

    def embed(self, texts):
        rows = [
            np.random.default_rng(len(t) * 977 + 13).normal(size=48) for t in texts
        ]
        return np.asarray(rows)


def test_export_loads_as_engine_corpus(tmp_path):
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    texts = [
        {"id": "alpha", "text": "the first passage"},
        {"id": "beta", "text": "a second, longer passage"},
        {"id": "gamma", "text": "third"},
    ]
    texts_path = tmp_path / "texts.jsonl"
    texts_path.write_text(
        "".join(json.dumps(t) + "\n" for t in texts), encoding="utf-8"
    )
    job = ExportJob(
        model="encoder-x",
        pooling="cls",
        texts_path=texts_path,
        out_embeddings=corpus_dir / "base.spem",
        out_ids=corpus_dir / "ids.txt",
    )
    result = export_embeddings(job, OrthoEncoder())
    assert (result.count, result.dim) == (3, 48)

    loaded = contrascope.load_corpus_dir(corpus_dir)
    assert list(loaded.ids) == ["alpha", "beta", "gamma"]
    matrix = loaded.space("base")
    assert matrix.shape == (3, 48)
    expected = OrthoEncoder().embed([t["text"] for t in texts]).astype(np.float32)
    assert np.array_equal(matrix, expected)


def test_exported_bytes_match_engine_writer(tmp_path):
    """Both packages must produce byte-identical containers for equal data."""
    vecs = np.random.default_rng(5).normal(size=(4, 9)).astype(np.float32)
    from embed_export import write_spem

    ours = tmp_path / "ours.spem"
    theirs = tmp_path / "theirs.spem"
    write_spem(ours, vecs)
    contrascope.corpus.write_embeddings(theirs, vecs)
    assert ours.read_bytes() == theirs.read_bytes()
