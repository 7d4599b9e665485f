"""Per-file feature extraction for a change request.

Each candidate file is encoded as a 20-dimensional vector laid out as four
churn dims, four structural dims, five dependency-graph dims, three semantic
dims, a three-way change-type one-hot, and the file age. The same raw signals
also feed the deterministic ranking stage. Standard scaling is fitted on
training rows only and applied identically at inference.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np

from .graph import DegreeFeatures
from .ingest import ChangeRequest, FileRecord, HistoryFeatures, RepositoryModel
from .keywords import KeywordSet, split_identifier, tokenize

log = logging.getLogger(__name__)

FEATURE_NAMES = (
    "total_change_count",
    "changes_last_12mo",
    "top_contributor_pct",
    "days_since_last_change",
    "loc",
    "function_count",
    "class_count",
    "cyclomatic_complexity",
    "pagerank",
    "in_degree",
    "out_degree",
    "fan_in",
    "fan_out",
    "bm25_score",
    "keyword_hit_fraction",
    "embedding_cosine",
    "is_bugfix",
    "is_feature",
    "is_refactor",
    "file_age_days",
)
FEATURE_DIM = len(FEATURE_NAMES)

DEFAULT_BM25_K1 = 1.2
DEFAULT_BM25_B = 0.75

_ROUTE_PREFIXES = ("app.", "router.")
_ROUTE_VERBS = {"get", "post", "put", "delete", "patch", "route"}
_DB_OPS = {"add", "commit", "query", "execute"}


@dataclass(frozen=True)
class KeywordHits:
    path_hits: int = 0
    symbol_hits: int = 0
    call_hits: int = 0
    route_hits: int = 0
    db_hits: int = 0
    bm25: float = 0.0
    hit_fraction: float = 0.0


@dataclass(frozen=True)
class CorpusStats:
    """Document frequencies and length statistics over the whole repository."""

    doc_count: int
    doc_freq: Mapping[str, int]
    avg_doc_len: float


def build_corpus_stats(model: RepositoryModel) -> CorpusStats:
    doc_freq: Counter = Counter()
    total_len = 0
    for file_id in model.files:
        doc = model.token_doc(file_id)
        total_len += sum(doc.values())
        doc_freq.update(doc.keys())
    n = len(model.files)
    return CorpusStats(n, dict(doc_freq), total_len / n if n else 0.0)


def bm25(
    keywords: KeywordSet,
    file_tokens: Mapping[str, int],
    stats: CorpusStats,
    k1: float = DEFAULT_BM25_K1,
    b: float = DEFAULT_BM25_B,
) -> float:
    """Okapi BM25 between the keyword set and one file's token bag.

    IDF uses the classic log((N - df + 0.5) / (df + 0.5)) form floored at 0,
    so a term present in every document contributes nothing. Terms absent
    from the corpus contribute 0. Per-term keyword weights scale each
    contribution (all 1.0 by default).
    """
    if keywords.is_empty() or stats.doc_count == 0:
        return 0.0
    doc_len = sum(file_tokens.values())
    score = 0.0
    for term, weight in zip(keywords.keywords, keywords.weights):
        df = stats.doc_freq.get(term, 0)
        if df == 0:
            continue
        idf = max(0.0, math.log((stats.doc_count - df + 0.5) / (df + 0.5)))
        tf = file_tokens.get(term, 0)
        if tf == 0 or idf == 0.0:
            continue
        denom = tf + k1 * (1.0 - b + b * doc_len / stats.avg_doc_len)
        score += weight * idf * tf * (k1 + 1.0) / denom
    return score


def _is_route_call(name: str) -> bool:
    low = name.lower()
    return low.startswith(_ROUTE_PREFIXES) and low.rsplit(".", 1)[-1] in _ROUTE_VERBS


def _is_db_call(name: str) -> bool:
    return name.lower().rsplit(".", 1)[-1] in _DB_OPS


def keyword_hits(
    keywords: KeywordSet,
    record: FileRecord,
    call_names: set[str],
    bm25_score: float = 0.0,
) -> KeywordHits:
    """Count keyword matches against path, symbols, and call names.

    Matching is case-insensitive substring containment. Route and DB hits
    count keywords found inside route-registration call names (app.get,
    app.post, ...) and database-operation call names (add, commit, query,
    execute). ``hit_fraction`` is the share of keywords matched anywhere.
    """
    if keywords.is_empty():
        return KeywordHits(bm25=bm25_score)
    path = record.path.lower()
    symbols = [s.lower() for s in record.symbols]
    calls = sorted(n.lower() for n in call_names)
    route_calls = [n for n in calls if _is_route_call(n)]
    db_calls = [n for n in calls if _is_db_call(n)]

    path_hits = symbol_hits = call_hits = route_hits = db_hits = matched = 0
    for term in keywords:
        in_path = term in path
        in_symbols = any(term in s for s in symbols)
        in_calls = any(term in c for c in calls)
        path_hits += in_path
        symbol_hits += in_symbols
        call_hits += in_calls
        route_hits += any(term in c for c in route_calls)
        db_hits += any(term in c for c in db_calls)
        matched += in_path or in_symbols or in_calls
    return KeywordHits(
        path_hits=path_hits,
        symbol_hits=symbol_hits,
        call_hits=call_hits,
        route_hits=route_hits,
        db_hits=db_hits,
        bm25=bm25_score,
        hit_fraction=matched / len(keywords),
    )


class SimilarityProvider(Protocol):
    def similarity(self, text_a: str, text_b: str) -> float: ...


class HashedTokenEmbedding:
    """Bundled offline similarity provider.

    Texts are embedded as hashed bag-of-token count vectors (fixed dimension,
    fixed hash seed) and compared with cosine similarity. Deterministic across
    processes, so test suites never need network access. External embedding
    services can replace it behind the same ``similarity`` contract.
    """

    def __init__(self, dim: int = 256, seed: int = 17):
        self.dim = dim
        self._salt = seed.to_bytes(8, "little")

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, salt=self._salt).digest()
        return int.from_bytes(digest, "little") % self.dim

    def vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for raw in tokenize(text):
            for token in [raw] + split_identifier(raw):
                vec[self._bucket(token.lower())] += 1.0
        return vec

    def similarity(self, text_a: str, text_b: str) -> float:
        va, vb = self.vector(text_a), self.vector(text_b)
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(va @ vb / (na * nb))


DEFAULT_EMBEDDING = HashedTokenEmbedding()


def file_document_text(model: RepositoryModel, file_id: str) -> str:
    """Flattened token document of a file for the similarity provider."""
    doc = model.token_doc(file_id)
    return " ".join(tok for tok in sorted(doc) for _ in range(doc[tok]))


def embedding_cosine(
    request_text: str,
    file_text: str,
    provider: SimilarityProvider | None = None,
) -> float:
    """Semantic similarity in [-1, 1]; provider failures degrade to 0.0."""
    provider = provider or DEFAULT_EMBEDDING
    try:
        value = float(provider.similarity(request_text, file_text))
    except Exception as exc:  # noqa: BLE001 - any provider failure is non-fatal
        log.warning("similarity provider failed (%s); using neutral 0.0", exc)
        return 0.0
    if not np.isfinite(value):
        log.warning("similarity provider returned non-finite value; using 0.0")
        return 0.0
    return value


@dataclass
class FeatureScaler:
    """Per-dimension standardization fitted on training rows."""

    mean: np.ndarray
    std: np.ndarray
    fitted: bool = True

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (np.asarray(matrix, dtype=float) - self.mean) / self.std


def fit_scaler(training_matrix: np.ndarray) -> FeatureScaler:
    """Sample mean and population std per dimension.

    Dimensions that are constant over the training rows (std below 1e-12)
    keep std 1.0 so they pass through as plain mean-centering.
    """
    matrix = np.asarray(training_matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValueError("scaler fitting requires at least 2 rows")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return FeatureScaler(mean=mean, std=std)


def feature_row(
    record: FileRecord,
    request: ChangeRequest,
    hist: HistoryFeatures,
    degrees: DegreeFeatures,
    pagerank_score: float,
    hits: KeywordHits,
    embedding: float,
) -> np.ndarray:
    """Raw (unscaled) feature vector for one file, FEATURE_NAMES order."""
    return np.array(
        [
            hist.total_change_count,
            hist.changes_last_12mo,
            hist.top_contributor_pct,
            hist.days_since_last_change,
            record.loc,
            record.function_count,
            record.class_count,
            record.cyclomatic_complexity,
            pagerank_score,
            degrees.in_degree,
            degrees.out_degree,
            degrees.fan_in,
            degrees.fan_out,
            hits.bm25,
            hits.hit_fraction,
            embedding,
            1.0 if request.change_type == "bugfix" else 0.0,
            1.0 if request.change_type == "feature" else 0.0,
            1.0 if request.change_type == "refactor" else 0.0,
            record.age_days,
        ],
        dtype=float,
    )


def build_feature_matrix(raw: np.ndarray, scaler: FeatureScaler) -> np.ndarray:
    """Scale an N x 20 raw feature matrix with a fitted scaler."""
    if scaler is None or not scaler.fitted:
        raise ValueError("feature scaler is not fitted")
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != FEATURE_DIM:
        raise ValueError(f"expected an N x {FEATURE_DIM} matrix, got {raw.shape}")
    scaled = scaler.transform(raw)
    if not np.isfinite(scaled).all():
        raise ValueError("scaled feature matrix contains non-finite values")
    return scaled


def dump_matrix_csv(raw: np.ndarray, path) -> None:
    """Debug export of a feature matrix, columns in FEATURE_NAMES order."""
    header = ",".join(FEATURE_NAMES)
    np.savetxt(path, np.asarray(raw, dtype=float), delimiter=",", header=header, comments="")
