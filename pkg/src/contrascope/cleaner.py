"""Corpus cleaning: find and remove documents that contradict known-good ones.

Given ground-truth documents (as queries over the corpus), the cleaner runs
the combined-score search for each and removes the top few hits, on the
theory that whatever most contradicts a trusted document is injected noise.
The corruption experiment quantifies the damage and the repair: retrieval
quality on the original, corrupted, and cleaned corpora, plus how much of
the corrupted results were injected before and after.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import DualCorpus, QueryRecord, QrelSet
from .engine import SearchParams, batch_search, search
from .errors import ConfigError, FormatError, IoError
from .evalkit import corruption_fraction, evaluate


@dataclass(frozen=True)
class CleanConfig:
    """How aggressively to clean: hits removed per ground truth, and search knobs."""

    removals_per_groundtruth: int = 3
    params: SearchParams = field(default_factory=SearchParams)

    def validate(self) -> None:
        if self.removals_per_groundtruth < 1:
            raise ConfigError("removals_per_groundtruth must be >= 1")


@dataclass(frozen=True)
class CleanReport:
    """Outcome of cleaning and, when the experiment ran, its before/after metrics.

    clean() fills only the removal list; corruption_experiment fills the
    rest. recovered_loss_ratio is None whenever corruption did not actually
    cost anything (denominator <= 0), and is omitted from JSON in that case.
    """

    removed: tuple[tuple[str, float | None], ...]
    k: int = 10
    ndcg_original: float | None = None
    ndcg_corrupted: float | None = None
    ndcg_cleaned: float | None = None
    corruption_before: float | None = None
    corruption_after: float | None = None
    recovered_loss_ratio: float | None = None

    @property
    def removed_ids(self) -> tuple[str, ...]:
        return tuple(doc_id for doc_id, _ in self.removed)

    def to_json(self) -> str:
        obj = {
            "k": self.k,
            "removed": [
                {"doc": doc_id, "score": score} for doc_id, score in self.removed
            ],
            "ndcg_original": self.ndcg_original,
            "ndcg_corrupted": self.ndcg_corrupted,
            "ndcg_cleaned": self.ndcg_cleaned,
            "corruption_before": self.corruption_before,
            "corruption_after": self.corruption_after,
        }
        if self.recovered_loss_ratio is not None:
            obj["recovered_loss_ratio"] = self.recovered_loss_ratio
        return json.dumps(obj, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CleanReport":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad clean report JSON: {exc}") from None
        try:
            return cls(
                removed=tuple(
                    (str(r["doc"]), None if r["score"] is None else float(r["score"]))
                    for r in obj["removed"]
                ),
                k=int(obj["k"]),
                ndcg_original=_opt_float(obj.get("ndcg_original")),
                ndcg_corrupted=_opt_float(obj.get("ndcg_corrupted")),
                ndcg_cleaned=_opt_float(obj.get("ndcg_cleaned")),
                corruption_before=_opt_float(obj.get("corruption_before")),
                corruption_after=_opt_float(obj.get("corruption_after")),
                recovered_loss_ratio=_opt_float(obj.get("recovered_loss_ratio")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad clean report field: {exc}") from None

    def save(self, path: str | Path) -> None:
        try:
            Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write clean report {path}: {exc}") from exc

    def save_removed_ids(self, path: str | Path) -> None:
        """Plain text list of removed ids, one per line, for audit diffs."""
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for doc_id in self.removed_ids:
                    fh.write(f"{doc_id}\n")
        except OSError as exc:
            raise IoError(f"cannot write removed-ids file {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "CleanReport":
        try:
            return cls.from_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read clean report {path}: {exc}") from exc


def _opt_float(v) -> float | None:
    return None if v is None else float(v)


def clean(
    corrupted: DualCorpus,
    groundtruth: list[QueryRecord],
    cfg: CleanConfig,
) -> tuple[DualCorpus, CleanReport]:
    """Remove the documents scoring highest against each ground truth.

    Each ground truth contributes its top removals_per_groundtruth combined-
    score hits; removals accumulate as a set, so a document implicated twice
    is removed once (and keeps the highest score it was seen with). Ground
    truths should carry their own id in exclude_ids so they never remove
    themselves. The report returned here has only the removal list filled.
    """
    cfg.validate()
    params = dataclasses.replace(cfg.params, top_n=cfg.removals_per_groundtruth)
    best: dict[str, float] = {}
    for g in groundtruth:
        for hit in search(g, corrupted, params).hits:
            prev = best.get(hit.doc_id)
            if prev is None or hit.score > prev:
                best[hit.doc_id] = hit.score
    removed = tuple(
        sorted(best.items(), key=lambda item: (-item[1], item[0]))
    )
    cleaned = corrupted.without_docs(set(best))
    return cleaned, CleanReport(removed=removed)


def corruption_experiment(
    original: DualCorpus,
    corrupted: DualCorpus,
    cleaned: DualCorpus,
    test_queries: list[QueryRecord],
    qrels: QrelSet,
    corrupted_ids,
    params: SearchParams = SearchParams(),
    k: int = 10,
    removal_report: CleanReport | None = None,
    parallelism: int | None = None,
) -> CleanReport:
    """Measure retrieval quality across original/corrupted/cleaned corpora.

    Runs the same queries against all three, reporting NDCG@k on each plus
    the corruption fraction (share of top-k results that are injected ids)
    on the corrupted and cleaned ones. The recovered-loss ratio says how much
    of the quality lost to corruption the cleaning won back; it is absent
    when corruption caused no loss. Pass clean()'s report as removal_report
    to keep per-document scores; otherwise removed ids are inferred by
    comparing the corrupted and cleaned corpora.
    """
    bad = set(corrupted_ids)
    run_orig = batch_search(test_queries, original, params, parallelism=parallelism)
    run_corr = batch_search(test_queries, corrupted, params, parallelism=parallelism)
    run_clean = batch_search(test_queries, cleaned, params, parallelism=parallelism)

    acc_original = evaluate(run_orig, qrels, k=k).mean_ndcg or 0.0
    acc_corrupted = evaluate(run_corr, qrels, k=k).mean_ndcg or 0.0
    acc_cleaned = evaluate(run_clean, qrels, k=k).mean_ndcg or 0.0

    loss = acc_original - acc_corrupted
    ratio = (acc_cleaned - acc_corrupted) / loss if loss > 0 else None

    if removal_report is not None:
        removed = removal_report.removed
    else:
        gone = set(corrupted.ids) - set(cleaned.ids)
        removed = tuple((doc_id, None) for doc_id in sorted(gone))

    return CleanReport(
        removed=removed,
        k=k,
        ndcg_original=acc_original,
        ndcg_corrupted=acc_corrupted,
        ndcg_cleaned=acc_cleaned,
        corruption_before=corruption_fraction(run_corr, bad, k=k),
        corruption_after=corruption_fraction(run_clean, bad, k=k),
        recovered_loss_ratio=ratio,
    )
