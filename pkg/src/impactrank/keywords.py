"""Change-request keyword extraction.

A change request is expanded into a set of lowercase search terms either by a
deterministic local tokenizer or by querying an external completion endpoint.
The local extractor is a pure function; the endpoint path always falls back to
it, so callers are guaranteed a result.
"""

from __future__ import annotations

import json
import logging
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

# Bundled English stopword list. Versioned so downstream scores are
# reproducible across releases; extend only with a version bump.
STOPWORDS_VERSION = 1
STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can cannot could did do does doing down
during each few for from further had has have having he her here hers him his
how i if in into is it its itself just me more most my no nor not now of off
on once only or other our ours out over own same she should so some such than
that the their theirs them then there these they this those through to too
under until up very was we were what when where which while who whom why will
with would you your yours
""".split())

# One token: word characters optionally joined by dots (gc.freeze, app.get).
_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+(?:\.[A-Za-z0-9_]+)*")
_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|[0-9]+")

PROMPT_TEMPLATE = (
    "Extract the most relevant search keywords from the following software "
    "change request. Reply with one keyword per line and nothing else.\n\n"
    "Change request: {text}\n\nKeywords:\n"
)


@dataclass(frozen=True)
class LlmEndpoint:
    """Descriptor for an external text-completion service."""

    base_url: str
    model: str
    timeout: float = 10.0


@dataclass
class KeywordSet:
    """Ordered, deduplicated lowercase terms with per-term weights.

    Weights default to 1.0; no downstream component currently assigns
    non-uniform weights.
    """

    keywords: list[str]
    weights: list[float] = field(default_factory=list)
    source: str = "local"

    def __post_init__(self) -> None:
        if not self.weights:
            self.weights = [1.0] * len(self.keywords)

    def __len__(self) -> int:
        return len(self.keywords)

    def __iter__(self):
        return iter(self.keywords)

    def is_empty(self) -> bool:
        return not self.keywords


def split_identifier(token: str) -> list[str]:
    """Split a camelCase / snake_case / dotted identifier into subtokens."""
    parts: list[str] = []
    for chunk in re.split(r"[._]+", token):
        parts.extend(_CAMEL_RE.findall(chunk))
    return parts


def tokenize(text: str) -> list[str]:
    """Raw token stream of a text, compound identifiers intact."""
    return _TOKEN_RE.findall(text)


def extract_keywords_local(text: str) -> KeywordSet:
    """Deterministic keyword extraction from change-request text.

    Compound identifiers are kept alongside their subtokens so both exact
    path matches and fuzzy term matches can score. Stopwords and
    single-character terms are dropped; order of first occurrence is kept.
    """
    seen: dict[str, None] = {}
    for raw in tokenize(text):
        candidates = [raw] + split_identifier(raw)
        for cand in candidates:
            term = cand.lower()
            if len(term) < 2 or term in STOPWORDS:
                continue
            seen.setdefault(term, None)
    return KeywordSet(keywords=list(seen), source="local")


def _parse_completion(body: bytes) -> list[str]:
    payload = json.loads(body.decode("utf-8"))
    choices = payload.get("choices")
    if not choices:
        raise ValueError("completion response has no choices")
    text = choices[0].get("text", "")
    terms: dict[str, None] = {}
    for line in text.splitlines():
        for tok in tokenize(line):
            term = tok.lower()
            if len(term) >= 2 and term not in STOPWORDS:
                terms.setdefault(term, None)
    if not terms:
        raise ValueError("completion response contained no usable keywords")
    return list(terms)


def extract_keywords_llm(text: str, endpoint: LlmEndpoint) -> KeywordSet:
    """Keyword extraction via an external completion endpoint.

    Never fatal: any transport or parse failure falls back to
    :func:`extract_keywords_local` and the returned set reports
    ``source="local"`` so callers can record the fallback.
    """
    request = urllib.request.Request(
        endpoint.base_url.rstrip("/") + "/v1/completions",
        data=json.dumps(
            {
                "model": endpoint.model,
                "prompt": PROMPT_TEMPLATE.format(text=text),
                "max_tokens": 256,
                "temperature": 0,
            }
        ).encode("utf-8"),
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(request, timeout=endpoint.timeout) as resp:
            keywords = _parse_completion(resp.read())
    except (urllib.error.URLError, OSError, ValueError, KeyError) as exc:
        log.warning("keyword endpoint failed (%s); using local extractor", exc)
        return extract_keywords_local(text)
    return KeywordSet(keywords=keywords, source="llm")
