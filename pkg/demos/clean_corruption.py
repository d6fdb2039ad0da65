"""Poison a corpus with look-alike contradictions, then clean it back.

The injected contradictions are written to sit closer to the queries in
cosine space than the genuine paraphrases, so a plain cosine retriever
starts surfacing them at the top. Cleaning searches with the combined score
from each trusted document and removes the top hits.
"""

from __future__ import annotations

from contrascope import (
    CleanConfig,
    PlantedConfig,
    QrelSet,
    ScoreWeights,
    SearchParams,
    clean,
    corruption_experiment,
    generate_planted,
)

bundle = generate_planted(
    PlantedConfig(
        groups=40,
        dim_cos=48,
        dim_sparse=96,
        sparse_support=6,
        contradiction_magnitude=0.7,
        distractor_count=120,
        contrast_pool=12,
        cos_contradiction_sim=0.95,  # injected docs outshine real paraphrases
        seed=11,
    )
)
corrupted = bundle.corpus
contra_ids = sorted(
    d for d, g in bundle.group_of_doc.items() if g is not None and d[5] == "c"
)
original = corrupted.without_docs(set(contra_ids))
print(f"original {len(original)} docs, corrupted {len(corrupted)} "
      f"(+{len(contra_ids)} injected)")

# Question answering ground truth: each paraphrase should retrieve its
# siblings, not the injected contradictions.
para_of_group: dict[int, list[str]] = {}
for doc_id, g in bundle.group_of_doc.items():
    if g is not None and doc_id[5] == "p":
        para_of_group.setdefault(g, []).append(doc_id)
qa_qrels = QrelSet(
    {
        q.qid: {d: 1 for d in para_of_group[bundle.group_of_query[q.qid]] if d != q.qid}
        for q in bundle.queries
    }
)

cleaned, removal_report = clean(
    corrupted,
    bundle.queries,
    CleanConfig(
        removals_per_groundtruth=3,
        params=SearchParams(
            weights=ScoreWeights(alpha=1.0), k_candidates=len(corrupted), top_n=10
        ),
    ),
)
hit = len(set(removal_report.removed_ids) & set(contra_ids))
print(f"cleaning removed {len(removal_report.removed)} docs, "
      f"{hit} of them injected ({hit / len(removal_report.removed):.0%} precision)")

report = corruption_experiment(
    original,
    corrupted,
    cleaned,
    bundle.queries,
    qa_qrels,
    contra_ids,
    params=SearchParams(
        weights=ScoreWeights(alpha=0.0), k_candidates=len(corrupted), top_n=10
    ),
    removal_report=removal_report,
)
print(f"NDCG@10: original {report.ndcg_original:.3f} | "
      f"corrupted {report.ndcg_corrupted:.3f} | cleaned {report.ndcg_cleaned:.3f}")
print(f"injected docs in top 10: {report.corruption_before:.1%} before cleaning, "
      f"{report.corruption_after:.1%} after")
if report.recovered_loss_ratio is not None:
    print(f"recovered {report.recovered_loss_ratio:.0%} of the quality "
          f"lost to corruption")
