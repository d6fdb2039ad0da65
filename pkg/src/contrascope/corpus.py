"""Corpus data model, binary persistence, and deterministic synthetic data.

A corpus carries one embedding matrix per named space, aligned row-for-row
with its document ids. The "cosine" space feeds similarity scoring and the
"sparse" space feeds the sparsity-of-difference term; generated corpora add a
"base" space whose structure is hidden behind an orthogonal change of basis,
which is what the trainer learns to undo.

Embedding files are a small fixed binary format (magic "SPEM") so round trips
are bit-exact; ids, judgments, and texts are line-oriented text.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    ConfigError,
    DimensionMismatch,
    DuplicateId,
    FormatError,
    IoError,
    MissingSpace,
    SpaceExists,
    ZeroVector,
)

SPEM_MAGIC = b"SPEM"
SPEM_VERSION = 1

COSINE_SPACE = "cosine"
SPARSE_SPACE = "sparse"
BASE_SPACE = "base"


def _check_doc_id(doc_id: str) -> None:
    if not doc_id:
        raise FormatError("empty document id")
    for ch in doc_id:
        if ord(ch) < 0x20 or ord(ch) == 0x7F:
            raise FormatError(f"control character in document id {doc_id!r}")


@dataclass(frozen=True)
class EmbeddingSpace:
    """Descriptor of one embedding space: its name, dimension, and provenance tag."""

    name: str
    dim: int
    model_tag: str = ""


class DualCorpus:
    """Aligned documents with one embedding row per document per space.

    Instances are immutable: matrices are marked read-only and mutating
    operations return new corpora. Concurrent readers are safe.
    """

    def __init__(
        self,
        ids: list[str] | tuple[str, ...],
        spaces: dict[str, np.ndarray],
        texts: list[str | None] | tuple[str | None, ...] | None = None,
        tags: dict[str, str] | None = None,
    ) -> None:
        self.ids: tuple[str, ...] = tuple(ids)
        seen: set[str] = set()
        for doc_id in self.ids:
            _check_doc_id(doc_id)
            if doc_id in seen:
                raise DuplicateId(f"document id {doc_id!r} appears more than once")
            seen.add(doc_id)
        n = len(self.ids)
        if texts is None:
            texts = [None] * n
        if len(texts) != n:
            raise AlignmentError(f"{len(texts)} texts for {n} ids")
        self.texts: tuple[str | None, ...] = tuple(texts)
        if not spaces:
            raise MissingSpace("a corpus needs at least one embedding space")
        self._spaces: dict[str, np.ndarray] = {}
        for name, mat in spaces.items():
            arr = np.ascontiguousarray(mat, dtype=np.float32)
            if arr.ndim != 2:
                raise DimensionMismatch(f"space {name!r} matrix must be 2-d")
            if arr.shape[0] != n:
                raise AlignmentError(
                    f"space {name!r} has {arr.shape[0]} rows for {n} ids"
                )
            if arr.shape[1] < 2:
                raise DimensionMismatch(f"space {name!r} dim must be >= 2")
            if not np.all(np.isfinite(arr)):
                raise FormatError(f"space {name!r} contains non-finite values")
            arr.setflags(write=False)
            self._spaces[name] = arr
        self.tags: dict[str, str] = dict(tags or {})
        self._row_of: dict[str, int] = {doc_id: i for i, doc_id in enumerate(self.ids)}
        self._cache: dict[tuple[str, str], np.ndarray] = {}
        self._cache_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DualCorpus):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.texts == other.texts
            and set(self._spaces) == set(other._spaces)
            and all(
                np.array_equal(self._spaces[k], other._spaces[k]) for k in self._spaces
            )
        )

    @property
    def space_names(self) -> tuple[str, ...]:
        return tuple(self._spaces)

    def has_space(self, name: str) -> bool:
        return name in self._spaces

    def space(self, name: str) -> np.ndarray:
        """The (n_docs, dim) float32 matrix of one space. Read-only view."""
        try:
            return self._spaces[name]
        except KeyError:
            raise MissingSpace(f"corpus has no {name!r} space") from None

    def space_info(self, name: str) -> EmbeddingSpace:
        mat = self.space(name)
        return EmbeddingSpace(name, int(mat.shape[1]), self.tags.get(name, ""))

    def row_of(self, doc_id: str) -> int:
        return self._row_of[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._row_of

    def _cached(self, key: tuple[str, str], build) -> np.ndarray:
        with self._cache_lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        arr = build()
        arr.setflags(write=False)
        with self._cache_lock:
            return self._cache.setdefault(key, arr)

    def f64(self, name: str) -> np.ndarray:
        """Double-precision copy of a space matrix, cached."""
        return self._cached((name, "f64"), lambda: self.space(name).astype(np.float64))

    def id_ranks(self) -> np.ndarray:
        """Rank of each row's id in lexicographic id order, cached.

        Used as a secondary sort key so equal scores break ties toward the
        smaller document id.
        """

        def build() -> np.ndarray:
            order = sorted(range(len(self.ids)), key=lambda i: self.ids[i])
            ranks = np.empty(len(self.ids), dtype=np.int64)
            for rank, row in enumerate(order):
                ranks[row] = rank
            return ranks

        return self._cached(("", "id_ranks"), build)

    def unit_rows(self, name: str) -> np.ndarray:
        """Row-normalized double-precision matrix for cosine scoring, cached.

        Raises ZeroVector if any document has a (near-)zero embedding in the
        space, since its direction is undefined.
        """

        def build() -> np.ndarray:
            mat = self.f64(name)
            norms = np.linalg.norm(mat, axis=1)
            bad = np.nonzero(norms < 1e-12)[0]
            if bad.size:
                raise ZeroVector(
                    f"doc {self.ids[bad[0]]!r} has a zero vector in space {name!r}"
                )
            return mat / norms[:, None]

        return self._cached((name, "unit"), build)

    def with_space(self, name: str, matrix: np.ndarray, tag: str = "") -> "DualCorpus":
        """New corpus with an added space. Refuses to overwrite an existing one."""
        if name in self._spaces:
            raise SpaceExists(f"space {name!r} already present")
        spaces = dict(self._spaces)
        spaces[name] = matrix
        tags = dict(self.tags)
        if tag:
            tags[name] = tag
        return DualCorpus(self.ids, spaces, self.texts, tags)

    def without_docs(self, drop: set[str] | frozenset[str]) -> "DualCorpus":
        """New corpus without the given doc ids. Unknown ids are ignored."""
        keep = [i for i, doc_id in enumerate(self.ids) if doc_id not in drop]
        idx = np.asarray(keep, dtype=np.intp)
        return DualCorpus(
            [self.ids[i] for i in keep],
            {name: mat[idx] for name, mat in self._spaces.items()},
            [self.texts[i] for i in keep],
            self.tags,
        )


@dataclass(frozen=True)
class QueryRecord:
    """A query with one embedding per corpus space and ids it must never return."""

    qid: str
    embeddings: dict[str, np.ndarray]
    text: str | None = None
    exclude_ids: frozenset[str] = frozenset()

    def vector(self, space: str) -> np.ndarray:
        try:
            return self.embeddings[space]
        except KeyError:
            raise MissingSpace(f"query {self.qid!r} has no {space!r} embedding") from None


class QrelSet:
    """Graded relevance judgments: qid -> {doc_id -> relevance >= 1}."""

    def __init__(self, judgments: dict[str, dict[str, int]]) -> None:
        self._by_qid: dict[str, dict[str, int]] = {}
        for qid, docs in judgments.items():
            _check_doc_id(qid)
            if not docs:
                raise FormatError(f"query {qid!r} has no judged documents")
            clean: dict[str, int] = {}
            for doc_id, rel in docs.items():
                _check_doc_id(doc_id)
                rel = int(rel)
                if rel < 1:
                    raise FormatError(
                        f"relevance for ({qid!r}, {doc_id!r}) must be >= 1, got {rel}"
                    )
                clean[doc_id] = rel
            self._by_qid[qid] = clean

    def __contains__(self, qid: str) -> bool:
        return qid in self._by_qid

    def __len__(self) -> int:
        return len(self._by_qid)

    @property
    def qids(self) -> tuple[str, ...]:
        return tuple(self._by_qid)

    def relevant(self, qid: str) -> dict[str, int]:
        return dict(self._by_qid[qid])

    def restricted(self, qids) -> "QrelSet":
        want = set(qids)
        return QrelSet({q: d for q, d in self._by_qid.items() if q in want})

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {q: dict(d) for q, d in self._by_qid.items()}

    @classmethod
    def read(cls, path: str | Path) -> "QrelSet":
        """Parse TSV lines "qid<TAB>0<TAB>docid<TAB>rel". Column 2 is ignored."""
        judgments: dict[str, dict[str, int]] = {}
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read qrels file {path}: {exc}") from exc
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            qid, _, doc_id, rel_s = parts
            try:
                rel = int(rel_s)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad relevance {rel_s!r}") from None
            judgments.setdefault(qid, {})[doc_id] = rel
        return cls(judgments)

    def write(self, path: str | Path) -> None:
        lines = []
        for qid, docs in self._by_qid.items():
            for doc_id, rel in docs.items():
                lines.append(f"{qid}\t0\t{doc_id}\t{rel}\n")
        try:
            Path(path).write_text("".join(lines), encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write qrels file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Binary embedding files


def write_embeddings(path: str | Path, matrix: np.ndarray) -> None:
    """Write an (n, d) matrix as magic, version, dim, count, then f32 LE rows."""
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise DimensionMismatch("embedding matrix must be 2-d")
    n, d = arr.shape
    header = SPEM_MAGIC + struct.pack("<IIQ", SPEM_VERSION, d, n)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes(order="C"))
    except OSError as exc:
        raise IoError(f"cannot write embedding file {path}: {exc}") from exc


def read_embeddings(path: str | Path) -> np.ndarray:
    """Read an embedding file written by write_embeddings. Returns float32."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read embedding file {path}: {exc}") from exc
    header_len = 4 + 4 + 4 + 8
    if len(blob) < header_len or blob[:4] != SPEM_MAGIC:
        raise FormatError(f"{path}: not an embedding file (bad magic)")
    version, dim, count = struct.unpack("<IIQ", blob[4:header_len])
    if version != SPEM_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = header_len + count * dim * 4
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload is {len(blob) - header_len} bytes, "
            f"expected {count}x{dim} f32 = {expected - header_len}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=header_len)
    return data.reshape(int(count), int(dim)).copy()


def read_ids(path: str | Path) -> list[str]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read ids file {path}: {exc}") from exc
    ids = raw.splitlines()
    for doc_id in ids:
        _check_doc_id(doc_id)
    return ids


def write_ids(path: str | Path, ids) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for doc_id in ids:
                fh.write(f"{doc_id}\n")
    except OSError as exc:
        raise IoError(f"cannot write ids file {path}: {exc}") from exc


def read_texts(path: str | Path) -> dict[str, str]:
    """Parse JSON Lines of {"id": ..., "text": ...} records."""
    out: dict[str, str] = {}
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read texts file {path}: {exc}") from exc
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from None
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise FormatError(f'{path}:{lineno}: expected an object with "id" and "text"')
        out[str(obj["id"])] = str(obj["text"])
    return out


def write_texts(path: str | Path, ids, texts) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for doc_id, text in zip(ids, texts):
                if text is not None:
                    fh.write(json.dumps({"id": doc_id, "text": text}) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write texts file {path}: {exc}") from exc


def load_corpus(
    embedding_files: dict[str, str | Path],
    ids_file: str | Path,
    texts_file: str | Path | None = None,
) -> DualCorpus:
    """Load a corpus from per-space embedding files plus an ids file.

    All row counts must agree; ids must be unique. Texts are optional and
    matched by id (missing ids simply have no text).
    """
    ids = read_ids(ids_file)
    spaces: dict[str, np.ndarray] = {}
    for name, path in embedding_files.items():
        mat = read_embeddings(path)
        if mat.shape[0] != len(ids):
            raise AlignmentError(
                f"space {name!r} has {mat.shape[0]} rows but ids file has {len(ids)}"
            )
        spaces[name] = mat
    texts: list[str | None] | None = None
    if texts_file is not None:
        by_id = read_texts(texts_file)
        texts = [by_id.get(doc_id) for doc_id in ids]
    return DualCorpus(ids, spaces, texts)


def save_corpus(corpus: DualCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Write <space>.spem files, ids.txt, and texts.jsonl (when texts exist).

    Returns the mapping of written artifact names to paths. Round trips are
    bit-exact for embedding payloads.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    written: dict[str, Path] = {}
    for name in corpus.space_names:
        path = out / f"{name}.spem"
        write_embeddings(path, corpus.space(name))
        written[name] = path
    ids_path = out / "ids.txt"
    write_ids(ids_path, corpus.ids)
    written["ids"] = ids_path
    if any(t is not None for t in corpus.texts):
        texts_path = out / "texts.jsonl"
        write_texts(texts_path, corpus.ids, corpus.texts)
        written["texts"] = texts_path
    return written


def load_corpus_dir(corpus_dir: str | Path) -> DualCorpus:
    """Load a corpus saved by save_corpus (every *.spem file is a space)."""
    root = Path(corpus_dir)
    spem = sorted(root.glob("*.spem"))
    if not spem:
        raise FormatError(f"no .spem embedding files under {root}")
    texts = root / "texts.jsonl"
    return load_corpus(
        {p.stem: p for p in spem},
        root / "ids.txt",
        texts if texts.exists() else None,
    )


def save_queries(queries: list[QueryRecord], out_dir: str | Path) -> None:
    """Persist queries like a corpus: per-space .spem, qids.txt, excludes.jsonl."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    if not queries:
        write_ids(out / "qids.txt", [])
        return
    names = list(queries[0].embeddings)
    for q in queries:
        if list(q.embeddings) != names:
            raise AlignmentError("all queries must carry the same space set")
    for name in names:
        mat = np.stack([np.asarray(q.embeddings[name], dtype=np.float32) for q in queries])
        write_embeddings(out / f"{name}.spem", mat)
    write_ids(out / "qids.txt", [q.qid for q in queries])
    with open(out / "excludes.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            if q.exclude_ids:
                fh.write(
                    json.dumps({"qid": q.qid, "exclude": sorted(q.exclude_ids)}) + "\n"
                )


def load_queries(query_dir: str | Path) -> list[QueryRecord]:
    root = Path(query_dir)
    qids = read_ids(root / "qids.txt")
    spem = sorted(root.glob("*.spem"))
    mats = {p.stem: read_embeddings(p) for p in spem}
    for name, mat in mats.items():
        if mat.shape[0] != len(qids):
            raise AlignmentError(
                f"query space {name!r} has {mat.shape[0]} rows for {len(qids)} qids"
            )
    excludes: dict[str, frozenset[str]] = {}
    exc_path = root / "excludes.jsonl"
    if exc_path.exists():
        for line in exc_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            excludes[obj["qid"]] = frozenset(obj["exclude"])
    return [
        QueryRecord(
            qid=qid,
            embeddings={name: mats[name][i] for name in mats},
            exclude_ids=excludes.get(qid, frozenset()),
        )
        for i, qid in enumerate(qids)
    ]


# ---------------------------------------------------------------------------
# Planted synthetic corpora


@dataclass(frozen=True)
class PlantedConfig:
    """Geometry of a synthetic contradiction corpus.

    Each group plants one unit base vector in the sparse space; paraphrases
    add dense Gaussian noise (paraphrase_noise per coordinate) and
    contradictions add a signed offset of sparse_support nonzero coordinates
    scaled by contradiction_magnitude. Supports are drawn from a shared pool
    of contrast_pool axes when set (None means any coordinate), which is what
    makes the hidden-basis recovery problem well posed at small sample counts.

    The cosine space is generated independently so same-group documents look
    alike: cos_paraphrase_sim is the approximate similarity between two
    paraphrases and cos_contradiction_sim the approximate similarity between a
    query and a contradiction. The default places contradictions at the random
    background ceiling, so similarity-only retrieval is genuinely confounded.
    """

    groups: int = 100
    dim_cos: int = 64
    dim_sparse: int = 256
    paraphrases_per_group: int = 3
    contradictions_per_group: int = 3
    sparse_support: int = 8
    contradiction_magnitude: float = 0.5
    paraphrase_noise: float = 0.02
    distractor_count: int = 0
    seed: int = 0
    contrast_pool: int | None = None
    cos_paraphrase_sim: float = 0.92
    cos_contradiction_sim: float = 0.40

    def validate(self) -> None:
        if self.groups < 1:
            raise ConfigError("groups must be >= 1")
        if self.dim_cos < 2 or self.dim_sparse < 2:
            raise ConfigError("dims must be >= 2")
        if self.paraphrases_per_group < 1 or self.contradictions_per_group < 1:
            raise ConfigError("need at least one paraphrase and one contradiction per group")
        if not (1 <= self.sparse_support <= self.dim_sparse):
            raise ConfigError("sparse_support must be in [1, dim_sparse]")
        if self.contradiction_magnitude <= 0 or self.paraphrase_noise <= 0:
            raise ConfigError("magnitudes must be positive")
        if self.distractor_count < 0:
            raise ConfigError("distractor_count must be >= 0")
        if self.contrast_pool is not None and not (
            self.sparse_support <= self.contrast_pool <= self.dim_sparse
        ):
            raise ConfigError("contrast_pool must be in [sparse_support, dim_sparse]")
        if not (0.0 < self.cos_paraphrase_sim < 1.0):
            raise ConfigError("cos_paraphrase_sim must be in (0, 1)")
        if not (0.0 < self.cos_contradiction_sim < 1.0):
            raise ConfigError("cos_contradiction_sim must be in (0, 1)")
        if self.cos_contradiction_sim**2 >= self.cos_paraphrase_sim:
            raise ConfigError(
                "cos_contradiction_sim^2 must stay below cos_paraphrase_sim"
            )


@dataclass
class PlantedBundle:
    """Everything generate_planted produces, plus group bookkeeping.

    corpus/queries/qrels/tuples are the payload; group_of_doc maps doc id to
    its group index (None for distractors), group_of_query likewise for qids,
    and tuple_groups gives each training tuple's group. Splits share the full
    corpus and partition queries, judgments, and tuples by group.
    """

    corpus: DualCorpus
    queries: list[QueryRecord]
    qrels: QrelSet
    tuples: list  # list[TrainingTuple]; typed loosely to avoid an import cycle
    group_of_doc: dict[str, int | None] = field(default_factory=dict)
    group_of_query: dict[str, int] = field(default_factory=dict)
    tuple_groups: list[int] = field(default_factory=list)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate_planted(cfg: PlantedConfig) -> PlantedBundle:
    """Deterministically generate a planted contradiction corpus.

    Returns a bundle whose corpus has three spaces: "cosine" (unit rows,
    same-group documents mutually similar), "sparse" (planted offsets visible
    to sparsity scoring directly), and "base" (the sparse rows pushed through
    a seeded orthogonal map, hiding the offsets until an adapter undoes it).
    Queries are the paraphrases (each excluding itself), judgments mark the
    group's contradictions relevant, and training tuples pair every
    (paraphrase, contradiction) combination with a hard negative drawn from
    the remaining paraphrases, in base-space coordinates.
    """
    from .trainer import TrainingTuple

    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_para = cfg.paraphrases_per_group
    n_contra = cfg.contradictions_per_group
    d_s = cfg.dim_sparse
    d_c = cfg.dim_cos

    if cfg.contrast_pool is not None:
        pool = rng.choice(d_s, size=cfg.contrast_pool, replace=False)
    else:
        pool = np.arange(d_s)

    # Weight of the shared group direction inside each cosine-space vector.
    v_para = cfg.cos_paraphrase_sim
    v_contra = cfg.cos_contradiction_sim**2 / cfg.cos_paraphrase_sim

    ids: list[str] = []
    sparse_rows: list[np.ndarray] = []
    cos_rows: list[np.ndarray] = []
    group_of_doc: dict[str, int | None] = {}
    para_ids: list[list[str]] = []
    contra_ids: list[list[str]] = []
    para_sparse: list[list[np.ndarray]] = []

    for g in range(cfg.groups):
        x = _unit(rng.standard_normal(d_s))
        g_dir = _unit(rng.standard_normal(d_c))
        p_ids, c_ids, p_vecs = [], [], []
        for a in range(n_para):
            vec = x + cfg.paraphrase_noise * rng.standard_normal(d_s)
            doc_id = f"g{g:04d}p{a}"
            ids.append(doc_id)
            sparse_rows.append(vec)
            cos_rows.append(
                _unit(
                    np.sqrt(v_para) * g_dir
                    + np.sqrt(1.0 - v_para) * _unit(rng.standard_normal(d_c))
                )
            )
            group_of_doc[doc_id] = g
            p_ids.append(doc_id)
            p_vecs.append(vec)
        support = rng.choice(pool, size=cfg.sparse_support, replace=False)
        for b in range(n_contra):
            offset = np.zeros(d_s)
            offset[support] = rng.choice([-1.0, 1.0], size=cfg.sparse_support) * (
                0.8 + 0.4 * rng.random(cfg.sparse_support)
            )
            doc_id = f"g{g:04d}c{b}"
            ids.append(doc_id)
            sparse_rows.append(x + cfg.contradiction_magnitude * offset)
            cos_rows.append(
                _unit(
                    np.sqrt(v_contra) * g_dir
                    + np.sqrt(1.0 - v_contra) * _unit(rng.standard_normal(d_c))
                )
            )
            group_of_doc[doc_id] = g
            c_ids.append(doc_id)
        para_ids.append(p_ids)
        contra_ids.append(c_ids)
        para_sparse.append(p_vecs)

    for k in range(cfg.distractor_count):
        doc_id = f"noise{k:05d}"
        ids.append(doc_id)
        sparse_rows.append(_unit(rng.standard_normal(d_s)))
        cos_rows.append(_unit(rng.standard_normal(d_c)))
        group_of_doc[doc_id] = None

    sparse_mat = np.asarray(sparse_rows)
    cos_mat = np.asarray(cos_rows)
    basis, _ = np.linalg.qr(rng.standard_normal((d_s, d_s)))
    base_mat = sparse_mat @ basis.T

    corpus = DualCorpus(
        ids,
        {
            COSINE_SPACE: cos_mat.astype(np.float32),
            SPARSE_SPACE: sparse_mat.astype(np.float32),
            BASE_SPACE: base_mat.astype(np.float32),
        },
        tags={
            COSINE_SPACE: "planted-similarity",
            SPARSE_SPACE: "planted-contrast",
            BASE_SPACE: "planted-contrast-hidden-basis",
        },
    )

    queries: list[QueryRecord] = []
    group_of_query: dict[str, int] = {}
    judgments: dict[str, dict[str, int]] = {}
    for g in range(cfg.groups):
        for doc_id in para_ids[g]:
            row = corpus.row_of(doc_id)
            queries.append(
                QueryRecord(
                    qid=doc_id,
                    embeddings={
                        name: corpus.space(name)[row] for name in corpus.space_names
                    },
                    exclude_ids=frozenset({doc_id}),
                )
            )
            group_of_query[doc_id] = g
            judgments[doc_id] = {cid: 1 for cid in contra_ids[g]}
    qrels = QrelSet(judgments)

    # Base-space training triples: anchor paraphrase, contradiction positive,
    # and a hard negative drawn from the group's remaining paraphrases.
    base_f32 = corpus.space(BASE_SPACE)
    tuples: list[TrainingTuple] = []
    tuple_groups: list[int] = []
    if n_para >= 2:
        for g in range(cfg.groups):
            rows_p = [corpus.row_of(i) for i in para_ids[g]]
            rows_c = [corpus.row_of(i) for i in contra_ids[g]]
            for a in range(n_para):
                others = [i for i in range(n_para) if i != a]
                for b in range(n_contra):
                    pick = others[int(rng.integers(0, len(others)))]
                    tuples.append(
                        TrainingTuple(
                            anchor=base_f32[rows_p[a]],
                            positive=base_f32[rows_c[b]],
                            hard_negative=base_f32[rows_p[pick]],
                        )
                    )
                    tuple_groups.append(g)

    return PlantedBundle(
        corpus=corpus,
        queries=queries,
        qrels=qrels,
        tuples=tuples,
        group_of_doc=group_of_doc,
        group_of_query=group_of_query,
        tuple_groups=tuple_groups,
    )


def split_by_group(
    bundle: PlantedBundle,
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> tuple[PlantedBundle, PlantedBundle, PlantedBundle]:
    """Partition a bundle's groups into train/valid/test sub-bundles.

    The full corpus is shared by all three (retrieval always searches the
    whole corpus); queries, judgments, and training tuples are filtered to
    each part's groups. Group counts follow the fractions by largest
    remainder, so (0.6, 0.2, 0.2) on 100 groups gives exactly 60/20/20.
    """
    if len(fractions) != 3:
        raise ConfigError("fractions must be a (train, valid, test) triple")
    if any(f < 0 for f in fractions):
        raise ConfigError("fractions must be non-negative")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)}")

    groups = sorted({g for g in bundle.group_of_query.values()})
    n = len(groups)
    raw = [f * n for f in fractions]
    counts = [int(x) for x in raw]
    while sum(counts) < n:
        rema = [r - c for r, c in zip(raw, counts)]
        counts[int(np.argmax(rema))] += 1
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [groups[i] for i in order]
    parts = (
        set(shuffled[: counts[0]]),
        set(shuffled[counts[0] : counts[0] + counts[1]]),
        set(shuffled[counts[0] + counts[1] :]),
    )

    def filtered(keep: set[int]) -> PlantedBundle:
        queries = [q for q in bundle.queries if bundle.group_of_query[q.qid] in keep]
        qrels = bundle.qrels.restricted(q.qid for q in queries)
        tuples = [
            t for t, g in zip(bundle.tuples, bundle.tuple_groups) if g in keep
        ]
        tuple_groups = [g for g in bundle.tuple_groups if g in keep]
        return PlantedBundle(
            corpus=bundle.corpus,
            queries=queries,
            qrels=qrels,
            tuples=tuples,
            group_of_doc=bundle.group_of_doc,
            group_of_query={
                q: g for q, g in bundle.group_of_query.items() if g in keep
            },
            tuple_groups=tuple_groups,
        )

    return filtered(parts[0]), filtered(parts[1]), filtered(parts[2])
