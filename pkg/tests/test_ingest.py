"""NDJSON ingestion, history features, fallback ingestion, snapshots."""

import json

import pytest

from impactrank.errors import DataFormatError
from impactrank.ingest import (
    ChangeEvent,
    ChangeRequest,
    fallback_ast_ingest,
    history_features,
    ingest_history,
    ingest_ndjson,
    load_snapshot,
    save_snapshot,
    snapshot_hash,
)

NOW = 1_700_000_000
DAY = 86_400


def _lines(records):
    return [json.dumps(r) for r in records]


def _file_rec(fid, path, **extra):
    rec = {
        "id": fid,
        "path": path,
        "loc": 10,
        "functions": 1,
        "classes": 0,
        "complexity": 2.0,
        "first_commit_ts": NOW - 100 * DAY,
    }
    rec.update(extra)
    return rec


def test_three_files_no_calls():
    model = ingest_ndjson(
        _lines([_file_rec("a", "a.py"), _file_rec("b", "b.py"), _file_rec("c", "c.py")]),
        [], [], now=NOW,
    )
    assert len(model.files) == 3
    assert model.call_edges == []
    assert model.files["a"].age_days == pytest.approx(100.0)


def test_single_call_edge():
    model = ingest_ndjson(
        _lines([_file_rec("a", "a.py"), _file_rec("b", "b.py")]),
        [],
        _lines([{"caller_file": "a", "callee_file": "b", "name": "f"}]),
        now=NOW,
    )
    assert len(model.call_edges) == 1
    edge = model.call_edges[0]
    assert (edge.caller_file_id, edge.callee_file_id, edge.weight) == ("a", "b", 1)


def test_unresolvable_call_dropped_with_warning():
    model = ingest_ndjson(
        _lines([_file_rec("a", "a.py"), _file_rec("b", "b.py")]),
        [],
        _lines([{"caller_file": "a", "callee_file": "c", "name": "f"}]),
        now=NOW,
    )
    assert model.call_edges == []
    assert model.warning_total() == 1


def test_empty_files_stream_fatal():
    with pytest.raises(DataFormatError, match="no files"):
        ingest_ndjson([], [], [], now=NOW)


def test_duplicate_file_id_fatal():
    with pytest.raises(DataFormatError, match="duplicate id"):
        ingest_ndjson(_lines([_file_rec("a", "a.py"), _file_rec("a", "a2.py")]), [], [], now=NOW)


def test_malformed_lines_skipped_not_fatal():
    model = ingest_ndjson(
        ["not json", json.dumps(_file_rec("a", "a.py")), '{"id": "x"}'],
        ['{"file_id": "a"}'],
        ["{bad"],
        now=NOW,
    )
    assert list(model.files) == ["a"]
    assert model.warnings["files_malformed"] == 2
    assert model.warnings["symbols_malformed"] == 1
    assert model.warnings["calls_malformed"] == 1


def test_symbol_index_maps_names_to_files():
    model = ingest_ndjson(
        _lines([_file_rec("a", "a.py"), _file_rec("b", "b.py")]),
        _lines([
            {"file_id": "a", "symbol": "Shared", "kind": "class"},
            {"file_id": "b", "symbol": "Shared", "kind": "class"},
            {"file_id": "a", "symbol": "only_a", "kind": "def"},
        ]),
        [],
        now=NOW,
    )
    assert model.symbol_index["Shared"] == {"a", "b"}
    assert model.symbol_index["only_a"] == {"a"}
    assert model.files["a"].symbols == ["Shared", "only_a"]


def test_ingest_idempotent():
    files = _lines([_file_rec("a", "a.py"), _file_rec("b", "b.py")])
    symbols = _lines([{"file_id": "a", "symbol": "Foo", "kind": "class"}])
    calls = _lines([{"caller_file": "a", "callee_file": "b", "name": "f"}])
    one = ingest_ndjson(files, symbols, calls, now=NOW)
    two = ingest_ndjson(files, symbols, calls, now=NOW)
    assert one == two


def test_edge_weights_sum_to_resolvable_call_records():
    calls = [
        {"caller_file": "a", "callee_file": "b", "name": "f"},
        {"caller_file": "a", "callee_file": "b", "name": "f"},
        {"caller_file": "a", "callee_file": "b", "name": "g"},
        {"caller_file": "b", "callee_file": "a", "name": "h"},
        {"caller_file": "a", "callee_file": "zz", "name": "f"},
    ]
    model = ingest_ndjson(
        _lines([_file_rec("a", "a.py"), _file_rec("b", "b.py")]), [], _lines(calls), now=NOW,
    )
    assert sum(e.weight for e in model.call_edges) == 4


def test_history_contributor_share():
    events = [ChangeEvent("f", NOW - i * DAY, "A") for i in range(4)]
    events.append(ChangeEvent("f", NOW - 9 * DAY, "B"))
    feats = history_features(events, NOW)
    assert feats.total_change_count == 5
    assert feats.top_contributor_pct == pytest.approx(0.8)


def test_history_window_filter():
    events = [
        ChangeEvent("f", NOW - 30 * DAY, "A"),
        ChangeEvent("f", NOW - 400 * DAY, "A"),
    ]
    feats = history_features(events, NOW, window_days=365)
    assert feats.changes_last_12mo == 1
    assert feats.total_change_count == 2
    assert feats.days_since_last_change == pytest.approx(30.0)


def test_empty_history_defaults():
    feats = history_features([], NOW, default_days=123.0)
    assert feats.total_change_count == 0
    assert feats.changes_last_12mo == 0
    assert feats.top_contributor_pct == 0.0
    assert feats.days_since_last_change == 123.0


def test_history_order_invariant():
    recs = [
        {"ts": NOW - 3 * DAY, "author": "A", "paths": ["a.py"]},
        {"ts": NOW - 1 * DAY, "author": "B", "paths": ["a.py", "b.py"]},
        {"ts": NOW - 2 * DAY, "author": "A", "paths": ["a.py"]},
    ]
    path_to_id = {"a.py": "a", "b.py": "b"}
    forward_order = ingest_history(_lines(recs), path_to_id)
    reverse_order = ingest_history(_lines(reversed(recs)), path_to_id)
    assert forward_order == reverse_order
    stamps = [e.timestamp for e in forward_order["a"]]
    assert stamps == sorted(stamps)


def test_history_unparseable_skipped():
    events = ingest_history(['{"ts": "zzz"}', "nope"], {}, None)
    assert events == {}


def test_change_request_validation():
    with pytest.raises(DataFormatError):
        ChangeRequest(request_id="r", text="")
    with pytest.raises(DataFormatError):
        ChangeRequest(request_id="r", text="x", change_type="hotfix")


# ---------------------------------------------------------------------------
# Fallback ingestion
# ---------------------------------------------------------------------------

def test_fallback_two_files_one_import(tmp_path):
    (tmp_path / "core.py").write_text("def run():\n    return 1\n", encoding="utf-8")
    (tmp_path / "app.py").write_text("import core\n\ndef main():\n    core.run()\n", encoding="utf-8")
    model = fallback_ast_ingest(tmp_path, now=NOW)
    assert sorted(model.files) == ["app.py", "core.py"]
    assert model.mode == "ast_fallback"
    assert len(model.call_edges) == 1
    edge = model.call_edges[0]
    assert (edge.caller_file_id, edge.callee_file_id) == ("app.py", "core.py")
    assert model.files["core.py"].function_count == 1


def test_fallback_empty_directory_fatal(tmp_path):
    with pytest.raises(DataFormatError, match="no files"):
        fallback_ast_ingest(tmp_path, now=NOW)


def test_fallback_binary_skipped(tmp_path):
    (tmp_path / "ok.py").write_text("x = 1\n", encoding="utf-8")
    (tmp_path / "blob.py").write_bytes(b"\x00\x01\x02binary")
    model = fallback_ast_ingest(tmp_path, now=NOW)
    assert list(model.files) == ["ok.py"]
    assert model.warnings["fallback_binary"] == 1


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

def test_snapshot_round_trip(tmp_path, fixture_model):
    path = tmp_path / "snap.json"
    digest = save_snapshot(fixture_model, path)
    loaded = load_snapshot(path)
    assert snapshot_hash(loaded) == digest
    assert loaded.files == fixture_model.files
    assert loaded.call_edges == fixture_model.call_edges
    assert loaded.events_by_file == fixture_model.events_by_file


def test_snapshot_rejects_corruption(tmp_path, fixture_model):
    path = tmp_path / "snap.json"
    save_snapshot(fixture_model, path)
    doc = json.loads(path.read_text())
    doc["files"][0]["loc"] += 1
    path.write_text(json.dumps(doc))
    with pytest.raises(DataFormatError, match="corrupt snapshot"):
        load_snapshot(path)
