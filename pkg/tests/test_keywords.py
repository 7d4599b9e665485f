"""Keyword extraction: local tokenizer and endpoint fallback."""

import http.server
import json
import re
import threading

from impactrank.keywords import (
    KeywordSet,
    LlmEndpoint,
    extract_keywords_llm,
    extract_keywords_local,
)

TOKEN_GRAMMAR = re.compile(r"[a-z0-9_.]+")


def test_executor_query_contains_expected_terms():
    ks = extract_keywords_local("Fix LocalExecutor memory spike by applying gc.freeze")
    expected = {"localexecutor", "local", "executor", "memory", "spike", "gc", "freeze"}
    assert expected <= set(ks.keywords)
    assert ks.source == "local"


def test_empty_text_gives_empty_set():
    assert extract_keywords_local("").is_empty()


def test_all_stopwords_give_empty_set():
    assert extract_keywords_local("the of and").is_empty()


def test_terms_are_unique_and_match_grammar():
    ks = extract_keywords_local("Update DagRun.update_state and DagRun handling in dag_run twice twice")
    assert len(ks.keywords) == len(set(ks.keywords))
    for term in ks:
        assert TOKEN_GRAMMAR.fullmatch(term), term


def test_local_extraction_is_pure():
    text = "Refactor SchedulerJob event loop polling"
    a = extract_keywords_local(text)
    b = extract_keywords_local(text)
    assert a == b


def test_weights_default_uniform():
    ks = extract_keywords_local("memory spike")
    assert ks.weights == [1.0] * len(ks.keywords)
    assert KeywordSet(keywords=["a", "b"]).weights == [1.0, 1.0]


class _StubHandler(http.server.BaseHTTPRequestHandler):
    response_text = "executor\nmemory\ngc"

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        self.rfile.read(length)
        body = json.dumps({"choices": [{"text": self.response_text}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


def _serve(handler):
    server = http.server.HTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def test_llm_extraction_parses_lines():
    server = _serve(_StubHandler)
    try:
        endpoint = LlmEndpoint(base_url=f"http://127.0.0.1:{server.server_port}", model="stub")
        ks = extract_keywords_llm("fix executor memory", endpoint)
    finally:
        server.shutdown()
    assert ks.keywords == ["executor", "memory", "gc"]
    assert ks.source == "llm"


def test_llm_duplicate_lines_deduplicated():
    class DupHandler(_StubHandler):
        response_text = "gc\ngc"

    server = _serve(DupHandler)
    try:
        endpoint = LlmEndpoint(base_url=f"http://127.0.0.1:{server.server_port}", model="stub")
        ks = extract_keywords_llm("anything gc related", endpoint)
    finally:
        server.shutdown()
    assert ks.keywords == ["gc"]


def test_llm_unreachable_falls_back_to_local():
    endpoint = LlmEndpoint(base_url="http://127.0.0.1:1", model="stub", timeout=0.2)
    text = "Fix LocalExecutor memory spike"
    ks = extract_keywords_llm(text, endpoint)
    assert ks == extract_keywords_local(text)
    assert ks.source == "local"
