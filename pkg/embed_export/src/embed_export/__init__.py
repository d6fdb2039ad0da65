"""Bridge real models to the retrieval engine's file formats.

Two workflows live here: exporting sentence-encoder embeddings as SPEM and
ids files the engine loads directly, and generating paraphrase or
contradiction datasets for source passages through a chat API.
"""

from __future__ import annotations

from .client import API_BASE_ENV, API_KEY_ENV, DEFAULT_API_BASE, HttpChatClient
from .errors import (
    ApiError,
    ConfigError,
    ExportError,
    FormatError,
    GenerationError,
    IoError,
    MissingCredential,
    ModelUnavailable,
)
from .export import (
    POOLINGS,
    ExportJob,
    ExportResult,
    PooledEncoder,
    TransformerBackbone,
    export_embeddings,
    pool_hidden,
)
from .formats import (
    GenRecord,
    TextRecord,
    append_generations,
    read_generations,
    read_texts,
    sample_records,
    write_ids,
    write_spem,
)
from .generate import (
    CONTRADICTION_PROMPT,
    PARAPHRASE_PROMPT,
    PROMPTS,
    GenJob,
    GenReport,
    Truncation,
    generate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "API_BASE_ENV",
    "API_KEY_ENV",
    "ApiError",
    "CONTRADICTION_PROMPT",
    "ConfigError",
    "DEFAULT_API_BASE",
    "ExportError",
    "ExportJob",
    "ExportResult",
    "FormatError",
    "GenJob",
    "GenRecord",
    "GenReport",
    "GenerationError",
    "HttpChatClient",
    "IoError",
    "MissingCredential",
    "ModelUnavailable",
    "PARAPHRASE_PROMPT",
    "POOLINGS",
    "PROMPTS",
    "PooledEncoder",
    "TextRecord",
    "TransformerBackbone",
    "Truncation",
    "append_generations",
    "export_embeddings",
    "generate_dataset",
    "pool_hidden",
    "read_generations",
    "read_texts",
    "sample_records",
    "write_ids",
    "write_spem",
]
