"""Ranking metrics, evaluation reports, and coefficient tuning.

NDCG@k uses exponential gain (2^rel - 1) with a log2(rank + 1) discount and
normalizes by the ideal ordering of the query's own judgments. Recall@k here
is occupancy of the top positions: relevant hits divided by min(k, returned),
so a short return list is judged on what it actually shows.

tune_alpha searches the sparsity coefficient by repeatedly splitting an
interval into ten equal parts, scoring each part's midpoint by mean NDCG@10
on validation queries, and descending into the best part until the interval
is narrow enough. Ties prefer the smaller coefficient at every step, which
keeps the search deterministic and idempotent.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import DualCorpus, QueryRecord, QrelSet
from .engine import RankedList, SearchParams, batch_search
from .errors import ConfigError, EmptyValidationSet, FormatError, IoError, UnknownQuery
from .vecmath import ScoreWeights


def ndcg_at_k(ranked: RankedList, qrels: QrelSet, k: int = 10) -> float:
    """Normalized discounted cumulative gain of one ranked list at depth k.

    Unjudged documents count as non-relevant. Raises UnknownQuery when the
    list's qid has no judgments at all, since a silent zero there usually
    means mismatched files.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if ranked.qid not in qrels:
        raise UnknownQuery(f"no judgments for query {ranked.qid!r}")
    rels = qrels.relevant(ranked.qid)
    dcg = 0.0
    for i, doc_id in enumerate(ranked.doc_ids()[:k]):
        rel = rels.get(doc_id, 0)
        if rel:
            dcg += (2.0**rel - 1.0) / np.log2(i + 2.0)
    ideal = sorted(rels.values(), reverse=True)[:k]
    idcg = sum((2.0**rel - 1.0) / np.log2(i + 2.0) for i, rel in enumerate(ideal))
    if idcg == 0.0:
        return 0.0
    return float(dcg / idcg)


def recall_at_k(ranked: RankedList, target_ids, k: int = 10) -> float:
    """Fraction of the top-min(k, returned) positions holding target ids.

    Zero when the list is empty.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    top = ranked.doc_ids()[:k]
    if not top:
        return 0.0
    targets = set(target_ids)
    hits = sum(1 for doc_id in top if doc_id in targets)
    return hits / min(k, len(ranked.hits))


def corruption_fraction(run: list[RankedList], corrupted_ids, k: int = 10) -> float:
    """Mean share of the top-min(k, returned) positions holding corrupted ids.

    Reports carry this under the historical label "Recall@10" even though it
    is precision-shaped; the definition here is the operative one. Zero for
    an empty run.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if not run:
        return 0.0
    bad = set(corrupted_ids)
    total = 0.0
    for ranked in run:
        top = ranked.doc_ids()[:k]
        if top:
            total += sum(1 for doc_id in top if doc_id in bad) / min(
                k, len(ranked.hits)
            )
    return total / len(run)


@dataclass(frozen=True)
class EvalReport:
    """Per-query and mean metrics for one run. Means are None for empty runs."""

    k: int
    n_queries: int
    mean_ndcg: float | None
    mean_recall: float | None
    per_query: dict[str, dict[str, float]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "n_queries": self.n_queries,
                "mean_ndcg": self.mean_ndcg,
                "mean_recall": self.mean_recall,
                "per_query": self.per_query,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad evaluation report JSON: {exc}") from None
        try:
            return cls(
                k=int(obj["k"]),
                n_queries=int(obj["n_queries"]),
                mean_ndcg=None if obj["mean_ndcg"] is None else float(obj["mean_ndcg"]),
                mean_recall=(
                    None if obj["mean_recall"] is None else float(obj["mean_recall"])
                ),
                per_query={
                    str(q): {str(m): float(v) for m, v in d.items()}
                    for q, d in obj["per_query"].items()
                },
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad evaluation report field: {exc}") from None

    def save(self, path: str | Path) -> None:
        try:
            Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write report {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        try:
            return cls.from_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read report {path}: {exc}") from exc


def evaluate(run: list[RankedList], qrels: QrelSet, k: int = 10) -> EvalReport:
    """Score a whole run. Targets for recall are each query's judged docs."""
    per_query: dict[str, dict[str, float]] = {}
    for ranked in run:
        per_query[ranked.qid] = {
            "ndcg": ndcg_at_k(ranked, qrels, k),
            "recall": recall_at_k(ranked, qrels.relevant(ranked.qid), k),
        }
    n = len(per_query)
    return EvalReport(
        k=k,
        n_queries=n,
        mean_ndcg=(sum(d["ndcg"] for d in per_query.values()) / n) if n else None,
        mean_recall=(sum(d["recall"] for d in per_query.values()) / n) if n else None,
        per_query=per_query,
    )


@dataclass(frozen=True)
class AlphaRound:
    lo: float
    hi: float
    midpoints: tuple[float, ...]
    scores: tuple[float, ...]
    chosen: int


@dataclass(frozen=True)
class AlphaSearchTrace:
    """Full record of a coefficient search: every round, midpoint, and score."""

    rounds: tuple[AlphaRound, ...]
    best_alpha: float
    best_score: float
    evaluations: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "best_alpha": self.best_alpha,
                "best_score": self.best_score,
                "evaluations": self.evaluations,
                "rounds": [dataclasses.asdict(r) for r in self.rounds],
            },
            indent=2,
        )


def tune_alpha(
    valid_queries: list[QueryRecord],
    corpus: DualCorpus,
    qrels: QrelSet,
    params: SearchParams,
    alpha_range: tuple[float, float] = (0.0, 10.0),
    stop_width: float = 0.01,
    parallelism: int | None = None,
) -> tuple[float, AlphaSearchTrace]:
    """Pick the sparsity coefficient maximizing mean NDCG@10 on validation.

    Each round splits the current interval into ten equal parts and evaluates
    the midpoint of each, so the width shrinks tenfold per round; the search
    stops once the width is at most stop_width. The default [0, 10] down to
    0.01 therefore takes exactly three rounds and thirty evaluations. Equal
    scores choose the smaller coefficient within a round, while a later
    (finer) round takes over on exact ties across rounds; with a completely
    flat objective the result is the lowest midpoint of the final round.
    """
    if not valid_queries:
        raise EmptyValidationSet("tune_alpha needs at least one validation query")
    lo, hi = float(alpha_range[0]), float(alpha_range[1])
    if not (hi > lo):
        raise ConfigError(f"alpha range must satisfy lo < hi, got [{lo}, {hi}]")
    if lo < 0:
        raise ConfigError("alpha range must be non-negative")
    if stop_width <= 0:
        raise ConfigError("stop_width must be positive")

    def objective(alpha: float) -> float:
        trial = dataclasses.replace(
            params, weights=ScoreWeights(alpha=alpha, kind=params.weights.kind)
        )
        run = batch_search(valid_queries, corpus, trial, parallelism=parallelism)
        return evaluate(run, qrels, k=10).mean_ndcg or 0.0

    width = hi - lo
    rounds: list[AlphaRound] = []
    best_alpha = lo + width / 2.0
    best_score = -np.inf
    best_round = -1
    evaluations = 0
    round_idx = 0
    # The tolerance forgives accumulated rounding in width /= 10, so a range
    # that lands exactly on stop_width does not trigger a spurious extra round.
    while width > stop_width * (1.0 + 1e-9):
        step = width / 10.0
        midpoints = tuple(lo + (j + 0.5) * step for j in range(10))
        scores = []
        chosen = 0
        for j, mid in enumerate(midpoints):
            s = objective(mid)
            evaluations += 1
            scores.append(s)
            if s > scores[chosen]:
                chosen = j
            if s > best_score or (s == best_score and round_idx > best_round):
                best_alpha, best_score, best_round = mid, s, round_idx
        rounds.append(AlphaRound(lo, lo + width, midpoints, tuple(scores), chosen))
        lo = lo + chosen * step
        width = step
        round_idx += 1

    if best_score == -np.inf:
        # Range no wider than stop_width: nothing to evaluate, return its middle.
        best_score = float("nan")
    trace = AlphaSearchTrace(
        rounds=tuple(rounds),
        best_alpha=best_alpha,
        best_score=float(best_score),
        evaluations=evaluations,
    )
    return best_alpha, trace
