"""Two-stage retrieval: cosine candidate generation, combined-score rerank.

Stage one scans the corpus exactly (no approximate index) and keeps the top
k_candidates by cosine similarity. Stage two rescores those candidates with
the combined objective, cosine plus a weighted sparsity-of-difference term,
and returns the top_n. Both stages order equal scores by ascending document
id, so results are fully deterministic.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import COSINE_SPACE, SPARSE_SPACE, DualCorpus, QueryRecord
from .errors import ConfigError, FormatError, IoError, ZeroVector
from .vecmath import ScoreWeights, sparsity_rows

_SIG_DIGITS = 9


@dataclass(frozen=True)
class SearchParams:
    """Knobs for one retrieval pass.

    weights carries the sparsity coefficient and which sparsity function to
    use; cos_space and sparse_space name the corpus spaces each stage reads.
    k_candidates bounds the rerank pool and top_n the returned list.
    """

    weights: ScoreWeights = field(default_factory=ScoreWeights)
    cos_space: str = COSINE_SPACE
    sparse_space: str = SPARSE_SPACE
    k_candidates: int = 1000
    top_n: int = 10

    def __post_init__(self) -> None:
        if self.k_candidates < 1:
            raise ConfigError("k_candidates must be >= 1")
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    score: float
    cos: float
    sparsity: float


@dataclass(frozen=True)
class RankedList:
    qid: str
    hits: tuple[SearchHit, ...]

    def doc_ids(self) -> list[str]:
        return [h.doc_id for h in self.hits]


def _unit_query(vec: np.ndarray) -> np.ndarray:
    q = np.asarray(vec, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise ZeroVector("query vector has (near-)zero norm")
    return q / norm


def top_k_cosine(
    query_vec: np.ndarray,
    corpus: DualCorpus,
    k: int,
    space: str = COSINE_SPACE,
    exclude: frozenset[str] | set[str] = frozenset(),
) -> list[tuple[str, float]]:
    """Exact top-k by cosine similarity, ties broken by ascending doc id.

    Excluded ids never appear. Returns (doc_id, cosine) pairs, best first,
    fewer than k when the corpus (minus exclusions) is smaller.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    q = _unit_query(query_vec)
    unit = corpus.unit_rows(space)
    if unit.shape[1] != q.shape[0]:
        raise ConfigError(
            f"query dim {q.shape[0]} does not match space {space!r} dim {unit.shape[1]}"
        )
    scores = np.clip(unit @ q, -1.0, 1.0)
    if exclude:
        drop = [corpus.row_of(doc_id) for doc_id in exclude if doc_id in corpus]
        if drop:
            scores = scores.copy()
            scores[np.asarray(drop, dtype=np.intp)] = -np.inf
    order = np.lexsort((corpus.id_ranks(), -scores))
    out: list[tuple[str, float]] = []
    for row in order[:k]:
        s = scores[row]
        if s == -np.inf:
            break
        out.append((corpus.ids[row], float(s)))
    return out


def rerank(
    query: QueryRecord,
    candidates: list[tuple[str, float]],
    corpus: DualCorpus,
    weights: ScoreWeights,
    top_n: int,
    sparse_space: str = SPARSE_SPACE,
) -> tuple[SearchHit, ...]:
    """Score candidates with cosine plus weighted sparsity and keep the best.

    The sparsity of each query/candidate difference is always computed and
    reported, but with a zero coefficient the combined score is exactly the
    cosine (no floating-point residue from a zero-weighted term).
    """
    if top_n < 1:
        raise ConfigError("top_n must be >= 1")
    if not candidates:
        return ()
    q_sparse = query.vector(sparse_space)
    sparse = corpus.f64(sparse_space)
    rows = np.asarray(
        [corpus.row_of(doc_id) for doc_id, _ in candidates], dtype=np.intp
    )
    sp_vals = sparsity_rows(q_sparse, sparse[rows], weights.kind)
    scored: list[SearchHit] = []
    for (doc_id, cos), sp in zip(candidates, sp_vals):
        sp = float(sp)
        combined = cos if weights.alpha == 0.0 else cos + weights.alpha * sp
        scored.append(SearchHit(doc_id, combined, cos, sp))
    scored.sort(key=lambda h: (-h.score, h.doc_id))
    return tuple(scored[:top_n])


def search(query: QueryRecord, corpus: DualCorpus, params: SearchParams) -> RankedList:
    """Run both stages for one query."""
    candidates = top_k_cosine(
        query.vector(params.cos_space),
        corpus,
        params.k_candidates,
        space=params.cos_space,
        exclude=query.exclude_ids,
    )
    hits = rerank(
        query, candidates, corpus, params.weights, params.top_n, params.sparse_space
    )
    return RankedList(query.qid, hits)


def batch_search(
    queries: list[QueryRecord],
    corpus: DualCorpus,
    params: SearchParams,
    parallelism: int | None = None,
) -> list[RankedList]:
    """Search many queries, preserving input order.

    parallelism of None, 0, or 1 runs serially; larger values fan out over a
    thread pool (the heavy lifting is in the BLAS matmul, which releases the
    interpreter lock).
    """
    if parallelism is not None and parallelism < 0:
        raise ConfigError("parallelism must be >= 0")
    if not queries:
        return []
    if parallelism in (None, 0, 1):
        return [search(q, corpus, params) for q in queries]
    corpus.unit_rows(params.cos_space)  # build shared caches before fanning out
    corpus.f64(params.sparse_space)
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda q: search(q, corpus, params), queries))


def _sig(x: float) -> float:
    return float(f"{x:.{_SIG_DIGITS}g}")


def write_run(path: str | Path, runs: list[RankedList]) -> None:
    """Write ranked lists as JSON Lines, scores at 9 significant digits."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for run in runs:
                fh.write(
                    json.dumps(
                        {
                            "qid": run.qid,
                            "results": [
                                {
                                    "doc": h.doc_id,
                                    "score": _sig(h.score),
                                    "cos": _sig(h.cos),
                                    "sparsity": _sig(h.sparsity),
                                }
                                for h in run.hits
                            ],
                        }
                    )
                    + "\n"
                )
    except OSError as exc:
        raise IoError(f"cannot write run file {path}: {exc}") from exc


def read_run(path: str | Path) -> list[RankedList]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read run file {path}: {exc}") from exc
    runs: list[RankedList] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from None
        if not isinstance(obj, dict) or "qid" not in obj or "results" not in obj:
            raise FormatError(f'{path}:{lineno}: expected "qid" and "results"')
        hits = []
        for item in obj["results"]:
            try:
                hits.append(
                    SearchHit(
                        str(item["doc"]),
                        float(item["score"]),
                        float(item["cos"]),
                        float(item["sparsity"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad result entry: {exc}") from None
        runs.append(RankedList(str(obj["qid"]), tuple(hits)))
    return runs
