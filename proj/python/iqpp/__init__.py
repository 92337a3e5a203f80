"""Query performance prediction for query-by-example image retrieval."""

from ._core import (
    EmbeddingStore,
    IqppError,
    Qrels,
    Similarity,
    average_precision,
    emit_matrices,
    kendall_tau,
    load_detections,
    load_embeddings,
    load_qrels,
    load_scores,
    load_similarity_matrices,
    pearson,
    precision_at_k,
    rank,
    run_pipeline,
    significance,
    validate_embeddings,
    write_embeddings,
)
from . import adapters

__all__ = [
    "EmbeddingStore",
    "IqppError",
    "Qrels",
    "Similarity",
    "adapters",
    "average_precision",
    "emit_matrices",
    "kendall_tau",
    "load_detections",
    "load_embeddings",
    "load_qrels",
    "load_scores",
    "load_similarity_matrices",
    "pearson",
    "precision_at_k",
    "rank",
    "run_pipeline",
    "significance",
    "validate_embeddings",
    "write_embeddings",
]
