"""End-to-end wiring: repository index, request ranking, corpus loading.

The full chain for one change request: keyword extraction, per-file signal
computation, deterministic scoring with progressive filtering, candidate
feature encoding, attention refinement, and score combination into a ranked
report. A :class:`RepositoryIndex` caches everything request-independent
(graph features, churn features, corpus statistics) so repeated requests
against one snapshot stay cheap.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

import numpy as np

from .attention import AttentionModel, AttentionOutput, combine_scores, forward
from .config import RunConfig
from .errors import DataFormatError
from .features import (
    KeywordHits,
    build_corpus_stats,
    build_feature_matrix,
    bm25,
    embedding_cosine,
    feature_row,
    file_document_text,
    keyword_hits,
    SimilarityProvider,
)
from .graph import build_dependency_graph, degree_features, pagerank
from .ingest import ChangeRequest, RepositoryModel
from .keywords import KeywordSet, extract_keywords_llm, extract_keywords_local
from .ranking import CandidateSet, SIGNAL_NAMES, progressive_filter, score_files
from .report import RankingReport, build_report
from .training import LabeledCase

log = logging.getLogger(__name__)


class RepositoryIndex:
    """A repository model plus its request-independent derived features."""

    def __init__(self, model: RepositoryModel, config: RunConfig | None = None):
        config = config or RunConfig()
        self.model = model
        self.config = config
        self.graph = build_dependency_graph(model)
        self.pagerank = pagerank(
            self.graph,
            damping=config.damping,
            tol=config.pagerank_tol,
            max_iter=config.pagerank_max_iter,
        )
        self.degrees = degree_features(self.graph)
        self.corpus_stats = build_corpus_stats(model)
        self.history = {fid: model.history_features(fid) for fid in model.files}
        self.file_ids = sorted(model.files)
        self.paths = [model.files[fid].path for fid in self.file_ids]
        self._documents = {fid: file_document_text(model, fid) for fid in self.file_ids}

    def request_signals(
        self,
        request: ChangeRequest,
        keywords: KeywordSet,
        provider: SimilarityProvider | None = None,
    ) -> tuple[np.ndarray, list[KeywordHits], np.ndarray]:
        """Raw deterministic signals (SIGNAL_NAMES order) for every file."""
        rows = np.zeros((len(self.file_ids), len(SIGNAL_NAMES)))
        hits_list: list[KeywordHits] = []
        embeddings = np.zeros(len(self.file_ids))
        for i, fid in enumerate(self.file_ids):
            record = self.model.files[fid]
            score = bm25(
                keywords,
                self.model.token_doc(fid),
                self.corpus_stats,
                k1=self.config.bm25_k1,
                b=self.config.bm25_b,
            )
            hits = keyword_hits(keywords, record, self.model.call_names_by_file[fid], score)
            emb = embedding_cosine(request.text, self._documents[fid], provider)
            hits_list.append(hits)
            embeddings[i] = emb
            rows[i] = [
                hits.bm25,
                hits.hit_fraction,
                hits.path_hits,
                hits.symbol_hits,
                hits.call_hits,
                hits.route_hits,
                hits.db_hits,
                self.pagerank.scores[fid],
                self.degrees[fid].fan_in,
                self.history[fid].changes_last_12mo,
                emb,
            ]
        return rows, hits_list, embeddings

    def candidate_features(
        self,
        request: ChangeRequest,
        candidate_ids: list[str],
        hits_by_file: dict[str, KeywordHits],
        embedding_by_file: dict[str, float],
    ) -> np.ndarray:
        """Raw 20-dim feature rows for the given candidates."""
        rows = [
            feature_row(
                self.model.files[fid],
                request,
                self.history[fid],
                self.degrees[fid],
                self.pagerank.scores[fid],
                hits_by_file[fid],
                embedding_by_file[fid],
            )
            for fid in candidate_ids
        ]
        return np.vstack(rows)


@dataclass
class RankResult:
    report: RankingReport
    candidates: CandidateSet
    attention: AttentionOutput | None
    keywords: KeywordSet
    order_indices: list[int]
    candidate_paths: list[str]


def resolve_keywords(request: ChangeRequest, config: RunConfig) -> KeywordSet:
    if config.keyword_mode == "llm" and config.llm_endpoint is not None:
        return extract_keywords_llm(request.text, config.llm_endpoint)
    if config.keyword_mode == "llm":
        log.warning("keyword_mode=llm but no endpoint configured; using local extractor")
    return extract_keywords_local(request.text)


def rank_request(
    index: RepositoryIndex,
    request: ChangeRequest,
    config: RunConfig | None = None,
    model: AttentionModel | None = None,
    provider: SimilarityProvider | None = None,
    keywords: KeywordSet | None = None,
) -> RankResult:
    """Rank all repository files for one change request.

    Without a fitted attention model the ranking is purely deterministic
    (adjustments and the centrality term are zero).
    """
    config = config or index.config
    if keywords is None:
        keywords = resolve_keywords(request, config)

    signals, hits_list, embeddings = index.request_signals(request, keywords, provider)
    det_scores = score_files(signals, config.weights)
    scored = list(zip(index.file_ids, index.paths, det_scores))
    candidates = progressive_filter(scored, config.stage_sizes)

    cand_ids = candidates.file_ids()
    cand_paths = [index.model.files[fid].path for fid in cand_ids]
    det_cand = candidates.scores()

    hits_by_file = dict(zip(index.file_ids, hits_list))
    emb_by_file = dict(zip(index.file_ids, embeddings))

    attention_out: AttentionOutput | None = None
    if model is not None:
        raw = index.candidate_features(request, cand_ids, hits_by_file, emb_by_file)
        x = build_feature_matrix(raw, model.scaler)
        attention_out = forward(
            x,
            model,
            damping=config.damping,
            tol=config.pagerank_tol,
            max_iter=config.pagerank_max_iter,
        )
        final = combine_scores(
            det_cand,
            attention_out.adjustments,
            attention_out.attention_pagerank,
            mode=model.combine_mode,
            pagerank_weight=model.pagerank_weight,
        )
        adjustments = attention_out.adjustments
        if model.combine_mode == "multiplicative":
            pagerank_terms = np.zeros_like(det_cand)
        else:
            pagerank_terms = model.pagerank_weight * attention_out.attention_pagerank
    else:
        final = det_cand.copy()
        adjustments = np.zeros_like(det_cand)
        pagerank_terms = np.zeros_like(det_cand)

    report = build_report(
        request.request_id, cand_ids, cand_paths, final, det_cand, adjustments,
        pagerank_terms, top_k=config.top_k,
    )
    report.metadata = {
        "keyword_source": keywords.source,
        "keyword_count": len(keywords),
        "candidate_stage": candidates.stage,
        "candidate_count": len(candidates),
        "combine_mode": model.combine_mode if model else "deterministic_only",
        "ingest_mode": index.model.mode,
    }
    order_indices = sorted(range(len(cand_ids)), key=lambda i: (-final[i], cand_paths[i]))
    return RankResult(
        report=report,
        candidates=candidates,
        attention=attention_out,
        keywords=keywords,
        order_indices=order_indices,
        candidate_paths=cand_paths,
    )


def parse_request(obj: dict | str, default_ts: int = 0) -> ChangeRequest:
    """Build a ChangeRequest from a JSON object or bare request text."""
    if isinstance(obj, str):
        digest = hashlib.sha1(obj.encode("utf-8")).hexdigest()[:12]
        return ChangeRequest(request_id=f"req-{digest}", text=obj, timestamp=default_ts)
    try:
        return ChangeRequest(
            request_id=str(obj["request_id"]),
            text=str(obj["text"]),
            change_type=str(obj.get("change_type", "feature")),
            timestamp=int(obj.get("timestamp", default_ts)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad change request object: {exc}") from exc


def load_labeled_corpus(
    lines,
    index: RepositoryIndex,
    config: RunConfig | None = None,
    provider: SimilarityProvider | None = None,
) -> list[LabeledCase]:
    """Resolve a labeled-case NDJSON corpus against a repository index.

    Each record: {"request": {...}, "candidates": [file_ids], "positives":
    [file_ids]}. Missing "candidates" derives them by progressive filtering.
    Unknown file ids are dropped with a warning; cases left without at least
    one positive and one negative are skipped.
    """
    config = config or index.config
    cases: list[LabeledCase] = []
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            request = parse_request(record["request"])
            positives = [str(p) for p in record["positives"]]
            raw_candidates = record.get("candidates")
        except (json.JSONDecodeError, KeyError, TypeError, DataFormatError) as exc:
            log.warning("skipping corpus line %d: %s", line_no, exc)
            continue

        keywords = resolve_keywords(request, config)
        signals, hits_list, embeddings = index.request_signals(request, keywords, provider)
        det_scores = score_files(signals, config.weights)
        det_by_file = dict(zip(index.file_ids, det_scores))
        hits_by_file = dict(zip(index.file_ids, hits_list))
        emb_by_file = dict(zip(index.file_ids, embeddings))

        if raw_candidates:
            candidate_ids = []
            for cid in (str(c) for c in raw_candidates):
                if cid in index.model.files:
                    candidate_ids.append(cid)
                else:
                    log.warning("corpus line %d: unknown candidate %s dropped", line_no, cid)
        else:
            scored = list(zip(index.file_ids, index.paths, det_scores))
            candidate_ids = progressive_filter(scored, config.stage_sizes).file_ids()

        truth = {i for i, cid in enumerate(candidate_ids) if cid in set(positives)}
        dropped = set(positives) - set(candidate_ids)
        if dropped:
            log.warning("corpus line %d: positives outside candidate set dropped: %s",
                        line_no, sorted(dropped))
        if not truth or len(truth) >= len(candidate_ids):
            log.warning("skipping corpus line %d: needs >=1 positive and >=1 negative", line_no)
            continue

        features = index.candidate_features(request, candidate_ids, hits_by_file, emb_by_file)
        deterministic = np.array([det_by_file[cid] for cid in candidate_ids])
        cases.append(
            LabeledCase(
                request=request,
                features=features,
                deterministic=deterministic,
                ground_truth=truth,
                candidate_ids=candidate_ids,
            )
        )
    return cases
