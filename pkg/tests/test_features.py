"""Feature extraction: BM25 oracle, keyword hits, embedding, scaler."""

import math

import numpy as np
import pytest

from impactrank.features import (
    FEATURE_DIM,
    CorpusStats,
    HashedTokenEmbedding,
    bm25,
    build_feature_matrix,
    embedding_cosine,
    feature_row,
    fit_scaler,
    keyword_hits,
)
from impactrank.graph import DegreeFeatures
from impactrank.ingest import ChangeRequest, FileRecord, HistoryFeatures
from impactrank.keywords import KeywordSet


def bm25_oracle(tf, df, n_docs, doc_len, avg_len, k1, b):
    """One-line direct evaluation of the Okapi formula with floored IDF."""
    idf = max(0.0, math.log((n_docs - df + 0.5) / (df + 0.5)))
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc_len / avg_len))


def _record(path="a.py", symbols=()):
    return FileRecord(
        file_id=path, path=path, loc=10, function_count=1, class_count=0,
        cyclomatic_complexity=1.0, symbols=list(symbols),
    )


def test_bm25_empty_keywords_zero():
    stats = CorpusStats(2, {"x": 1}, 4.0)
    assert bm25(KeywordSet([]), {"x": 1}, stats) == 0.0


@pytest.mark.parametrize("n_docs,df", [(2, 1), (3, 1), (10, 3)])
def test_bm25_single_term_matches_direct_formula(n_docs, df):
    stats = CorpusStats(n_docs, {"term": df}, 6.0)
    got = bm25(KeywordSet(["term"]), {"term": 1, "other": 5}, stats, k1=1.2, b=0.75)
    assert got == pytest.approx(bm25_oracle(1, df, n_docs, 6.0, 6.0, 1.2, 0.75), abs=1e-12)


def test_bm25_term_in_every_document_contributes_zero():
    stats = CorpusStats(5, {"everywhere": 5}, 7.0)
    assert bm25(KeywordSet(["everywhere"]), {"everywhere": 3}, stats) == 0.0


def test_bm25_absent_term_contributes_zero():
    stats = CorpusStats(4, {"known": 1}, 3.0)
    assert bm25(KeywordSet(["unknown"]), {"known": 1}, stats) == 0.0


def test_bm25_monotone_in_term_frequency():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n_docs = int(rng.integers(3, 50))
        df = int(rng.integers(1, max(2, n_docs // 2)))
        stats = CorpusStats(n_docs, {"t": df}, float(rng.uniform(2, 40)))
        k1 = float(rng.uniform(0.5, 2.0))
        b = float(rng.uniform(0.0, 1.0))
        doc_extra = int(rng.integers(0, 30))
        previous = -1.0
        for tf in range(1, 12):
            score = bm25(KeywordSet(["t"]), {"t": tf, "pad": doc_extra}, stats, k1=k1, b=b)
            assert score >= previous
            previous = score


def test_keyword_hits_path_match():
    record = _record(path="executors/local_executor.py")
    hits = keyword_hits(KeywordSet(["executor"]), record, set())
    assert hits.path_hits >= 1
    assert hits.hit_fraction == 1.0


def test_keyword_hits_empty_keywords_all_zero():
    hits = keyword_hits(KeywordSet([]), _record(), {"session.commit"})
    assert (hits.path_hits, hits.symbol_hits, hits.call_hits, hits.route_hits, hits.db_hits) == (0, 0, 0, 0, 0)
    assert hits.hit_fraction == 0.0


def test_keyword_hits_symbol_fraction():
    record = _record(path="z.py", symbols=["SpawnWorker", "Poller", "Config"])
    hits = keyword_hits(KeywordSet(["spawnworker"]), record, set())
    assert hits.symbol_hits == 1
    assert hits.hit_fraction == 1.0


def test_keyword_hits_route_and_db():
    record = _record(path="api/routes.py")
    calls = {"app.get", "app.post", "session.commit", "helper"}
    hits = keyword_hits(KeywordSet(["get", "commit", "helper"]), record, calls)
    assert hits.route_hits == 1  # "get" inside app.get
    assert hits.db_hits == 1     # "commit" inside session.commit
    assert hits.call_hits == 3


def test_embedding_identity_and_orthogonality():
    provider = HashedTokenEmbedding()
    assert embedding_cosine("gc freeze memory", "gc freeze memory", provider) == pytest.approx(1.0)
    assert embedding_cosine("alpha beta", "gamma delta", provider) == pytest.approx(0.0)


def test_embedding_overlap_scores_higher():
    provider = HashedTokenEmbedding()
    with_terms = embedding_cosine("memory spike", "memory spike worker pool", provider)
    without = embedding_cosine("memory spike", "widget gadget helper", provider)
    assert with_terms > without


def test_embedding_provider_failure_neutral():
    class Broken:
        def similarity(self, a, b):
            raise RuntimeError("boom")

    assert embedding_cosine("a", "b", Broken()) == 0.0


def test_scaler_hand_values():
    scaler = fit_scaler(np.array([[0.0], [2.0]]))
    assert scaler.mean[0] == pytest.approx(1.0)
    assert scaler.std[0] == pytest.approx(1.0)


def test_scaler_constant_column_forced_std():
    scaler = fit_scaler(np.array([[5.0], [5.0], [5.0]]))
    assert scaler.mean[0] == pytest.approx(5.0)
    assert scaler.std[0] == 1.0


def test_scaler_refit_identical():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(20, 4))
    a, b = fit_scaler(data), fit_scaler(data)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.std, b.std)


def test_scaler_requires_two_rows():
    with pytest.raises(ValueError):
        fit_scaler(np.ones((1, 3)))


def test_scaled_training_matrix_is_standardized():
    rng = np.random.default_rng(4)
    data = rng.normal(loc=3.0, scale=2.5, size=(64, FEATURE_DIM))
    data[:, 5] = 7.0  # one degenerate dimension
    scaler = fit_scaler(data)
    scaled = build_feature_matrix(data, scaler)
    means = scaled.mean(axis=0)
    stds = scaled.std(axis=0)
    assert np.abs(means).max() < 1e-9
    for dim in range(FEATURE_DIM):
        if dim != 5:
            assert abs(stds[dim] - 1.0) < 1e-9


def test_build_feature_matrix_zero_row_at_mean():
    rng = np.random.default_rng(9)
    data = rng.normal(size=(10, FEATURE_DIM))
    scaler = fit_scaler(data)
    scaled = build_feature_matrix(data.mean(axis=0, keepdims=True), scaler)
    assert np.abs(scaled).max() < 1e-12


def test_build_feature_matrix_shape_and_unfitted():
    rng = np.random.default_rng(1)
    data = rng.normal(size=(40, FEATURE_DIM))
    scaler = fit_scaler(data)
    assert build_feature_matrix(data, scaler).shape == (40, FEATURE_DIM)
    with pytest.raises(ValueError, match="not fitted"):
        build_feature_matrix(data, None)


def test_feature_row_layout_and_one_hot():
    record = _record(path="executors/local_executor.py", symbols=["LocalExecutor"])
    record.loc, record.age_days = 420, 900.0
    request = ChangeRequest(request_id="r", text="fix memory", change_type="bugfix")
    row = feature_row(
        record,
        request,
        HistoryFeatures(12, 3, 0.5, 40.0),
        DegreeFeatures(2, 1, 5.0, 3.0),
        0.01,
        keyword_hits(KeywordSet(["executor"]), record, set(), bm25_score=1.5),
        0.25,
    )
    assert row.shape == (FEATURE_DIM,)
    assert row[0] == 12 and row[1] == 3
    assert row[4] == 420
    assert row[8] == pytest.approx(0.01)
    assert row[13] == pytest.approx(1.5)
    assert row[16:19].tolist() == [1.0, 0.0, 0.0]
    assert row[16:19].sum() == 1.0
    assert row[19] == pytest.approx(900.0)
