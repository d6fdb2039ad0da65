"""Dump embeddings from a sentence encoder into the engine's file formats.

The export path is deliberately layered. A backbone turns a batch of texts
into per-token hidden states plus an attention mask; pool_hidden collapses
those to one vector per text; export_embeddings streams batches through an
encoder and writes the rows in input order. Tests (and any caller with a
different model stack) can replace the backbone or the whole encoder, since
each layer is plain duck typing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, FormatError, ModelUnavailable
from .formats import read_texts, write_ids, write_spem

POOLINGS = ("cls", "avg")


def pool_hidden(hidden: np.ndarray, mask: np.ndarray, pooling: str) -> np.ndarray:
    """Collapse (n, tokens, dim) hidden states to (n, dim) float32 vectors.

    "cls" takes the first token's state. "avg" averages the states whose
    mask entry is nonzero; a text with no attended tokens has no average,
    so that row is an error rather than a silent NaN.
    """
    if pooling not in POOLINGS:
        raise ConfigError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
    h = np.asarray(hidden, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    if h.ndim != 3:
        raise ConfigError(f"hidden states must be 3-D, got shape {h.shape}")
    if m.shape != h.shape[:2]:
        raise ConfigError(f"mask shape {m.shape} does not match hidden {h.shape[:2]}")
    if pooling == "cls":
        return h[:, 0, :].astype(np.float32)
    counts = m.sum(axis=1)
    empty = np.nonzero(counts == 0)[0]
    if empty.size:
        raise FormatError(f"row {int(empty[0])} has no attended tokens to average")
    summed = (h * m[:, :, None]).sum(axis=1)
    return (summed / counts[:, None]).astype(np.float32)


class PooledEncoder:
    """Pooling applied on top of any backbone with a hidden_states method."""

    def __init__(self, backbone, pooling: str):
        if pooling not in POOLINGS:
            raise ConfigError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
        self.backbone = backbone
        self.pooling = pooling

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        hidden, mask = self.backbone.hidden_states(texts)
        return pool_hidden(hidden, mask, self.pooling)


class TransformerBackbone:
    """Hidden states from a Hugging Face encoder, loaded lazily.

    torch and transformers are optional dependencies; importing this module
    never pulls them in, only constructing a backbone does.
    """

    def __init__(self, model_id: str, max_seq_len: int):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ModelUnavailable(
                "torch and transformers are required for model-backed export; "
                "install the 'encoder' extra"
            ) from exc
        self._torch = torch
        self.max_seq_len = max_seq_len
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise ModelUnavailable(f"cannot load model {model_id!r}: {exc}") from exc
        self.model.eval()

    def hidden_states(self, texts: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        enc = self.tokenizer(
            list(texts),
            padding=True,
            truncation=True,
            max_length=self.max_seq_len,
            return_tensors="pt",
        )
        with self._torch.inference_mode():
            out = self.model(**enc)
        hidden = out.last_hidden_state.cpu().numpy()
        mask = enc["attention_mask"].cpu().numpy()
        return hidden, mask


@dataclass(frozen=True)
class ExportJob:
    """Everything needed to embed one texts file.

    max_seq_len defaults to 512; passage corpora with shorter documents
    commonly run at 256 instead. Both are encoder-side truncation limits in
    tokens, applied by the backbone's tokenizer.
    """

    model: str
    pooling: str
    texts_path: str | Path
    out_embeddings: str | Path
    out_ids: str | Path
    batch_size: int = 32
    max_seq_len: int = 512

    def __post_init__(self):
        if not self.model:
            raise ConfigError("model identifier must be non-empty")
        if self.pooling not in POOLINGS:
            raise ConfigError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_seq_len < 1:
            raise ConfigError("max_seq_len must be >= 1")


@dataclass(frozen=True)
class ExportResult:
    count: int
    dim: int
    embeddings_path: Path
    ids_path: Path


def export_embeddings(job: ExportJob, encoder=None) -> ExportResult:
    """Embed every text in job.texts_path and write SPEM plus ids files.

    Row order matches input order exactly. The default encoder pools a
    transformer backbone per the job; passing any object with an
    embed(texts) -> (n, dim) array method overrides it.
    """
    records = read_texts(job.texts_path)
    if not records:
        raise FormatError(f"{job.texts_path}: no texts to export")
    if encoder is None:
        encoder = PooledEncoder(TransformerBackbone(job.model, job.max_seq_len), job.pooling)
    chunks: list[np.ndarray] = []
    for start in range(0, len(records), job.batch_size):
        batch = records[start : start + job.batch_size]
        vecs = np.asarray(encoder.embed([r.text for r in batch]))
        if vecs.ndim != 2 or vecs.shape[0] != len(batch):
            raise FormatError(
                f"encoder returned shape {vecs.shape} for a batch of {len(batch)} texts"
            )
        if chunks and vecs.shape[1] != chunks[0].shape[1]:
            raise FormatError(
                f"encoder dimension changed across batches: "
                f"{chunks[0].shape[1]} then {vecs.shape[1]}"
            )
        chunks.append(vecs.astype(np.float32))
    matrix = np.vstack(chunks)
    write_spem(job.out_embeddings, matrix)
    write_ids(job.out_ids, [r.id for r in records])
    return ExportResult(
        count=matrix.shape[0],
        dim=matrix.shape[1],
        embeddings_path=Path(job.out_embeddings),
        ids_path=Path(job.out_ids),
    )
