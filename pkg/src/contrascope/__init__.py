"""Contradiction-aware retrieval over dual embedding spaces.

Cosine similarity finds documents about the same thing; the sparsity of the
embedding difference in a contrast-tuned space tells apart the ones that
disagree. This package scores, searches, evaluates, tunes, trains the
contrast space, and cleans poisoned corpora, all on plain numpy arrays.
"""

from .cleaner import CleanConfig, CleanReport, clean, corruption_experiment
from .corpus import (
    BASE_SPACE,
    COSINE_SPACE,
    SPARSE_SPACE,
    DualCorpus,
    EmbeddingSpace,
    PlantedBundle,
    PlantedConfig,
    QrelSet,
    QueryRecord,
    generate_planted,
    load_corpus,
    load_corpus_dir,
    load_queries,
    read_embeddings,
    save_corpus,
    save_queries,
    split_by_group,
    write_embeddings,
)
from .engine import (
    RankedList,
    SearchHit,
    SearchParams,
    batch_search,
    read_run,
    rerank,
    search,
    top_k_cosine,
    write_run,
)
from .errors import (
    AlignmentError,
    ConfigError,
    ContrascopeError,
    DegeneratePair,
    DimensionMismatch,
    DuplicateId,
    EmptyValidationSet,
    FormatError,
    InvalidTemperature,
    IoError,
    MissingSpace,
    SpaceExists,
    UnknownQuery,
    ZeroVector,
)
from .evalkit import (
    AlphaSearchTrace,
    EvalReport,
    corruption_fraction,
    evaluate,
    ndcg_at_k,
    recall_at_k,
    tune_alpha,
)
from .trainer import (
    Adapter,
    TrainConfig,
    TrainingTuple,
    apply_adapter,
    gradient_check,
    load_tuples,
    loss_gradient,
    save_tuples,
    sparsecl_loss,
    train,
)
from .vecmath import (
    DEGENERATE_NORM,
    ScoreWeights,
    SparsityKind,
    combined_score,
    cosine,
    hoyer,
    kappa4,
    l2_over_l1,
    sparsity,
    sparsity_rows,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "Adapter",
    "AlphaSearchTrace",
    "BASE_SPACE",
    "CleanConfig",
    "CleanReport",
    "COSINE_SPACE",
    "ConfigError",
    "ContrascopeError",
    "DEGENERATE_NORM",
    "DegeneratePair",
    "DimensionMismatch",
    "DualCorpus",
    "DuplicateId",
    "EmbeddingSpace",
    "EmptyValidationSet",
    "EvalReport",
    "FormatError",
    "InvalidTemperature",
    "IoError",
    "MissingSpace",
    "PlantedBundle",
    "PlantedConfig",
    "QrelSet",
    "QueryRecord",
    "RankedList",
    "SPARSE_SPACE",
    "ScoreWeights",
    "SearchHit",
    "SearchParams",
    "SpaceExists",
    "SparsityKind",
    "TrainConfig",
    "TrainingTuple",
    "UnknownQuery",
    "ZeroVector",
    "apply_adapter",
    "batch_search",
    "clean",
    "combined_score",
    "corruption_experiment",
    "corruption_fraction",
    "cosine",
    "evaluate",
    "generate_planted",
    "gradient_check",
    "hoyer",
    "kappa4",
    "l2_over_l1",
    "load_corpus",
    "load_corpus_dir",
    "load_queries",
    "load_tuples",
    "loss_gradient",
    "ndcg_at_k",
    "read_embeddings",
    "read_run",
    "recall_at_k",
    "rerank",
    "save_corpus",
    "save_queries",
    "save_tuples",
    "search",
    "sparsecl_loss",
    "sparsity",
    "sparsity_rows",
    "split_by_group",
    "top_k_cosine",
    "train",
    "tune_alpha",
    "write_embeddings",
    "write_run",
]
