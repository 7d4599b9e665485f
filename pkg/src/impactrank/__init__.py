"""impactrank: rank repository files by change-request impact.

A deterministic heuristic baseline (BM25, keyword hits, dependency PageRank,
churn) is refined by a trained multi-head self-attention layer whose per-file
adjustments are added to the baseline scores.
"""

from .attention import AttentionModel, AttentionOutput, combine_scores, forward, init_model, zero_model
from .config import RunConfig, load_config
from .errors import CheckpointError, DataFormatError, ImpactRankError
from .features import FeatureScaler, KeywordHits, bm25, build_feature_matrix, embedding_cosine, fit_scaler, keyword_hits
from .graph import DepGraph, build_dependency_graph, degree_features, pagerank
from .ingest import (
    ChangeRequest,
    FileRecord,
    RepositoryModel,
    fallback_ast_ingest,
    ingest_history,
    ingest_ndjson,
    load_snapshot,
    save_snapshot,
)
from .keywords import KeywordSet, extract_keywords_llm, extract_keywords_local
from .pipeline import RepositoryIndex, load_labeled_corpus, rank_request
from .ranking import CandidateSet, DeterministicWeights, deterministic_score, progressive_filter
from .report import RankingReport, attention_coverage, mean_recall, mrr, recall_at_k
from .training import LabeledCase, TrainConfig, load_model, pairwise_loss, save_model, temporal_split, train

__version__ = "0.1.0"

__all__ = [
    "AttentionModel",
    "AttentionOutput",
    "CandidateSet",
    "ChangeRequest",
    "CheckpointError",
    "DataFormatError",
    "DepGraph",
    "DeterministicWeights",
    "FeatureScaler",
    "FileRecord",
    "ImpactRankError",
    "KeywordHits",
    "KeywordSet",
    "LabeledCase",
    "RankingReport",
    "RepositoryIndex",
    "RepositoryModel",
    "RunConfig",
    "TrainConfig",
    "attention_coverage",
    "bm25",
    "build_dependency_graph",
    "build_feature_matrix",
    "combine_scores",
    "degree_features",
    "deterministic_score",
    "embedding_cosine",
    "extract_keywords_llm",
    "extract_keywords_local",
    "fallback_ast_ingest",
    "fit_scaler",
    "forward",
    "ingest_history",
    "ingest_ndjson",
    "init_model",
    "keyword_hits",
    "load_config",
    "load_labeled_corpus",
    "load_model",
    "load_snapshot",
    "mean_recall",
    "mrr",
    "pagerank",
    "pairwise_loss",
    "progressive_filter",
    "rank_request",
    "recall_at_k",
    "save_model",
    "save_snapshot",
    "temporal_split",
    "train",
    "zero_model",
]
