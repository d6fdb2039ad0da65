"""File formats shared with the retrieval engine, plus generation manifests.

The embedding container is the engine's own: a 20 byte header (magic
"SPEM", u32 version, u32 dim, u64 count, all little-endian) followed by
count*dim float32 values in row-major order. Ids travel in a sibling text
file, one per line. Generation output is JSON Lines with the four keys
source_id, task, index, text.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, IoError

SPEM_MAGIC = b"SPEM"
SPEM_VERSION = 1


@dataclass(frozen=True)
class TextRecord:
    """One input passage: a document id and its text."""

    id: str
    text: str


@dataclass(frozen=True)
class GenRecord:
    """One generated passage tied to its source by (source_id, task, index)."""

    source_id: str
    task: str
    index: int
    text: str


def _check_id(value: str, *, what: str) -> None:
    if not value:
        raise FormatError(f"empty {what}")
    for ch in value:
        if ord(ch) < 0x20 or ord(ch) == 0x7F:
            raise FormatError(f"control character in {what} {value!r}")


def read_texts(path: str | Path) -> list[TextRecord]:
    """Parse JSON Lines of {"id": ..., "text": ...} in file order.

    Ids must be unique non-empty strings free of control characters, since
    they become retrieval document ids downstream. Blank lines are skipped.
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read texts file {path}: {exc}") from exc
    records: list[TextRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from None
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise FormatError(f'{path}:{lineno}: expected an object with "id" and "text"')
        doc_id, text = obj["id"], obj["text"]
        if not isinstance(doc_id, str) or not isinstance(text, str):
            raise FormatError(f"{path}:{lineno}: id and text must be strings")
        _check_id(doc_id, what="document id")
        if doc_id in seen:
            raise FormatError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        records.append(TextRecord(id=doc_id, text=text))
    return records


def write_spem(path: str | Path, matrix: np.ndarray) -> None:
    """Write a 2-D array as float32 in the engine's embedding container."""
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise FormatError(f"embedding matrix must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("embedding matrix contains non-finite values")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    n, d = arr.shape
    header = SPEM_MAGIC + struct.pack("<IIQ", SPEM_VERSION, d, n)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes(order="C"))
    except OSError as exc:
        raise IoError(f"cannot write embedding file {path}: {exc}") from exc


def write_ids(path: str | Path, ids: list[str]) -> None:
    """Write one id per line. Ids must be unique and loadable by the engine."""
    seen: set[str] = set()
    for doc_id in ids:
        _check_id(doc_id, what="document id")
        if doc_id in seen:
            raise FormatError(f"duplicate document id {doc_id!r}")
        seen.add(doc_id)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for doc_id in ids:
                fh.write(f"{doc_id}\n")
    except OSError as exc:
        raise IoError(f"cannot write ids file {path}: {exc}") from exc


def append_generations(path: str | Path, records: list[GenRecord]) -> None:
    """Append records to a generation manifest, one JSON object per line."""
    try:
        with open(path, "a", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(
                    json.dumps(
                        {
                            "source_id": rec.source_id,
                            "task": rec.task,
                            "index": rec.index,
                            "text": rec.text,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
            fh.flush()
    except OSError as exc:
        raise IoError(f"cannot write generation file {path}: {exc}") from exc


def read_generations(path: str | Path) -> list[GenRecord]:
    """Parse a generation manifest, validating every record."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read generation file {path}: {exc}") from exc
    records: list[GenRecord] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise FormatError(f"{path}:{lineno}: expected a JSON object")
        missing = {"source_id", "task", "index", "text"} - set(obj)
        if missing:
            raise FormatError(f"{path}:{lineno}: missing keys {sorted(missing)}")
        source_id, task, index, text = obj["source_id"], obj["task"], obj["index"], obj["text"]
        if not isinstance(source_id, str) or not isinstance(task, str) or not isinstance(text, str):
            raise FormatError(f"{path}:{lineno}: source_id, task, and text must be strings")
        if not isinstance(index, int) or isinstance(index, bool) or index < 0:
            raise FormatError(f"{path}:{lineno}: index must be a non-negative integer")
        records.append(GenRecord(source_id=source_id, task=task, index=index, text=text))
    return records


def sample_records(path: str | Path, k: int, seed: int = 0) -> list[GenRecord]:
    """Pick k records at random for eyeballing. Deterministic for a seed.

    Returns everything (in file order) when the manifest holds k records or
    fewer; a sample preserves file order too, so side-by-side reading stays
    easy.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    records = read_generations(path)
    if len(records) <= k:
        return records
    rng = np.random.default_rng(seed)
    picks = sorted(rng.choice(len(records), size=k, replace=False).tolist())
    return [records[i] for i in picks]
