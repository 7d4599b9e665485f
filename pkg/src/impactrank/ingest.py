"""Repository model construction.

Three NDJSON exports (files, symbols, calls) plus a version-history log are
parsed into an immutable in-memory model. A degraded fallback builds the same
model directly from a source tree when no export is available. All recency
math is relative to an explicit ``now`` instant so runs are reproducible.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

from .errors import DataFormatError
from .keywords import split_identifier

SECONDS_PER_DAY = 86400.0
CHANGE_TYPES = ("bugfix", "feature", "refactor")

SNAPSHOT_FORMAT = "impactrank-snapshot"
SNAPSHOT_VERSION = 1


@dataclass
class FileRecord:
    """One repository file with structure stats and graph identity."""

    file_id: str
    path: str
    loc: int
    function_count: int
    class_count: int
    cyclomatic_complexity: float
    symbols: list[str] = field(default_factory=list)
    age_days: float = 0.0
    first_commit_ts: int | None = None


@dataclass(frozen=True)
class CallEdge:
    """File-level call edge; weight counts call sites for this name."""

    caller_file_id: str
    callee_file_id: str
    call_name: str
    weight: int = 1


@dataclass(frozen=True)
class ChangeEvent:
    file_id: str
    timestamp: int
    author_id: str


@dataclass
class ChangeRequest:
    request_id: str
    text: str
    change_type: str = "feature"
    timestamp: int = 0

    def __post_init__(self) -> None:
        if not self.text:
            raise DataFormatError("change request text must be non-empty")
        if self.change_type not in CHANGE_TYPES:
            raise DataFormatError(
                f"unknown change_type {self.change_type!r}; expected one of {CHANGE_TYPES}"
            )


@dataclass
class HistoryFeatures:
    """Churn signals for one file, derived from its change events."""

    total_change_count: int
    changes_last_12mo: int
    top_contributor_pct: float
    days_since_last_change: float


@dataclass
class RepositoryModel:
    """Immutable snapshot of a repository at index time.

    Construction happens once (per stream, parsing may run in parallel);
    afterwards the model is treated as read-only and is safe to share.
    """

    files: dict[str, FileRecord]
    call_edges: list[CallEdge]
    symbol_index: dict[str, set[str]]
    events_by_file: dict[str, list[ChangeEvent]]
    now: int
    mode: str = "ndjson"
    warnings: Counter = field(default_factory=Counter)

    _path_to_id: dict[str, str] | None = field(default=None, compare=False, repr=False)
    _call_names: dict[str, set[str]] | None = field(default=None, compare=False, repr=False)
    _token_docs: dict[str, Counter] | None = field(default=None, compare=False, repr=False)

    def warning_total(self) -> int:
        return sum(self.warnings.values())

    @property
    def path_to_id(self) -> dict[str, str]:
        if self._path_to_id is None:
            self._path_to_id = {rec.path: fid for fid, rec in self.files.items()}
        return self._path_to_id

    @property
    def call_names_by_file(self) -> dict[str, set[str]]:
        """Call names seen at either endpoint of a file's edges."""
        if self._call_names is None:
            names: dict[str, set[str]] = {fid: set() for fid in self.files}
            for edge in self.call_edges:
                names[edge.caller_file_id].add(edge.call_name)
                names[edge.callee_file_id].add(edge.call_name)
            self._call_names = names
        return self._call_names

    def token_doc(self, file_id: str) -> Counter:
        """Searchable token bag for one file: path, symbols, call names."""
        if self._token_docs is None:
            self._token_docs = {}
        doc = self._token_docs.get(file_id)
        if doc is None:
            rec = self.files[file_id]
            doc = Counter()
            for source in _path_tokens(rec.path), rec.symbols, sorted(self.call_names_by_file[file_id]):
                for name in source:
                    doc[name.lower()] += 1
                    for sub in split_identifier(name):
                        low = sub.lower()
                        if low != name.lower():
                            doc[low] += 1
            self._token_docs[file_id] = doc
        return doc

    def repo_age_days(self) -> float:
        if not self.files:
            return 0.0
        return max(rec.age_days for rec in self.files.values())

    def history_features(self, file_id: str, window_days: float = 365.0) -> HistoryFeatures:
        events = self.events_by_file.get(file_id, [])
        return history_features(
            events, self.now, window_days=window_days, default_days=self.repo_age_days()
        )


def _path_tokens(path: str) -> list[str]:
    return [seg for seg in re.split(r"[/\\]+", path) if seg]


def normalize_path(path: str) -> str:
    path = path.replace("\\", "/").strip()
    while path.startswith("./"):
        path = path[2:]
    return path.strip("/")


def _iter_ndjson(stream: Iterable[str], warnings: Counter, tally: str) -> Iterator[dict]:
    for line in stream:
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            warnings[tally] += 1
            continue
        if not isinstance(record, dict):
            warnings[tally] += 1
            continue
        yield record


def ingest_ndjson(
    files_stream: Iterable[str],
    symbols_stream: Iterable[str],
    calls_stream: Iterable[str],
    now: int,
) -> RepositoryModel:
    """Parse the three NDJSON exports into a repository model.

    Malformed lines and unresolvable references are skipped and tallied in
    ``model.warnings``, never aborting the ingest. An empty files stream or a
    duplicate file id is fatal.
    """
    warnings: Counter = Counter()
    files: dict[str, FileRecord] = {}

    for rec in _iter_ndjson(files_stream, warnings, "files_malformed"):
        try:
            file_id = str(rec["id"])
            path = normalize_path(str(rec["path"]))
            if not path:
                raise KeyError("path")
            first_ts = int(rec["first_commit_ts"])
            record = FileRecord(
                file_id=file_id,
                path=path,
                loc=max(0, int(rec["loc"])),
                function_count=max(0, int(rec["functions"])),
                class_count=max(0, int(rec["classes"])),
                cyclomatic_complexity=max(0.0, float(rec["complexity"])),
                first_commit_ts=first_ts,
                age_days=max(0.0, (now - first_ts) / SECONDS_PER_DAY),
            )
        except (KeyError, TypeError, ValueError):
            warnings["files_malformed"] += 1
            continue
        if record.file_id in files:
            raise DataFormatError(f"duplicate id: {record.file_id}")
        files[record.file_id] = record

    if not files:
        raise DataFormatError("no files")

    symbol_index: dict[str, set[str]] = {}
    for rec in _iter_ndjson(symbols_stream, warnings, "symbols_malformed"):
        try:
            file_id = str(rec["file_id"])
            symbol = str(rec["symbol"])
        except (KeyError, TypeError):
            warnings["symbols_malformed"] += 1
            continue
        if file_id not in files:
            warnings["symbols_unresolved"] += 1
            continue
        if symbol not in files[file_id].symbols:
            files[file_id].symbols.append(symbol)
        symbol_index.setdefault(symbol, set()).add(file_id)

    edge_weights: Counter = Counter()
    for rec in _iter_ndjson(calls_stream, warnings, "calls_malformed"):
        try:
            caller = str(rec["caller_file"])
            callee = str(rec["callee_file"])
            name = str(rec["name"])
        except (KeyError, TypeError):
            warnings["calls_malformed"] += 1
            continue
        if caller not in files or callee not in files:
            warnings["calls_unresolved"] += 1
            continue
        edge_weights[(caller, callee, name)] += 1

    call_edges = [
        CallEdge(caller, callee, name, weight)
        for (caller, callee, name), weight in sorted(edge_weights.items())
    ]

    return RepositoryModel(
        files=files,
        call_edges=call_edges,
        symbol_index=symbol_index,
        events_by_file={},
        now=now,
        mode="ndjson",
        warnings=warnings,
    )


def ingest_history(
    log_stream: Iterable[str],
    path_to_id: Mapping[str, str],
    warnings: Counter | None = None,
) -> dict[str, list[ChangeEvent]]:
    """Parse a commit log into per-file change events, sorted by timestamp.

    Paths not present in the model (deleted files, vendored trees) are
    ignored. Unparseable records are skipped with a warning tally.
    """
    if warnings is None:
        warnings = Counter()
    events: dict[str, list[ChangeEvent]] = {}
    for rec in _iter_ndjson(log_stream, warnings, "history_malformed"):
        try:
            ts = int(rec["ts"])
            author = str(rec["author"])
            paths = rec["paths"]
            if not isinstance(paths, list):
                raise TypeError("paths")
        except (KeyError, TypeError, ValueError):
            warnings["history_malformed"] += 1
            continue
        for raw in paths:
            file_id = path_to_id.get(normalize_path(str(raw)))
            if file_id is None:
                warnings["history_unknown_path"] += 1
                continue
            events.setdefault(file_id, []).append(ChangeEvent(file_id, ts, author))
    for file_events in events.values():
        file_events.sort(key=lambda e: e.timestamp)
    return events


def history_features(
    events: list[ChangeEvent],
    now: int,
    window_days: float = 365.0,
    default_days: float = 0.0,
) -> HistoryFeatures:
    """Churn features for one file's event list, order-independent.

    ``default_days`` (normally the repository age) stands in for
    days-since-last-change when the file was never touched, avoiding an
    unbounded sentinel.
    """
    if not events:
        return HistoryFeatures(0, 0, 0.0, default_days)
    window_start = now - window_days * SECONDS_PER_DAY
    recent = sum(1 for e in events if e.timestamp >= window_start)
    by_author = Counter(e.author_id for e in events)
    top_share = max(by_author.values()) / len(events)
    last_ts = max(e.timestamp for e in events)
    days_since = max(0.0, (now - last_ts) / SECONDS_PER_DAY)
    return HistoryFeatures(len(events), recent, top_share, days_since)


# ---------------------------------------------------------------------------
# Fallback ingestion straight from a source tree
# ---------------------------------------------------------------------------

_PY_DEF_RE = re.compile(r"^\s*(?:async\s+)?def\s+(\w+)", re.MULTILINE)
_PY_CLASS_RE = re.compile(r"^\s*class\s+(\w+)", re.MULTILINE)
_PY_IMPORT_RE = re.compile(r"^\s*(?:from\s+([\w.]+)\s+import|import\s+([\w.]+))", re.MULTILINE)
_JS_FUNC_RE = re.compile(r"\bfunction\s+(\w+)|(\w+)\s*=\s*(?:async\s*)?\(")
_JS_CLASS_RE = re.compile(r"\bclass\s+(\w+)")
_JS_IMPORT_RE = re.compile(r"""(?:from|require\s*\()\s*['"]([^'"]+)['"]""")
_C_INCLUDE_RE = re.compile(r'#include\s+"([^"]+)"')

_SOURCE_SUFFIXES = {
    ".py", ".js", ".jsx", ".ts", ".tsx", ".mjs",
    ".c", ".h", ".cc", ".cpp", ".hpp",
    ".java", ".go", ".rb", ".rs",
    ".md", ".txt", ".cfg", ".ini", ".toml", ".yaml", ".yml", ".json",
}


def _looks_binary(data: bytes) -> bool:
    return b"\x00" in data


def _python_import_targets(module: str, importer: str, paths: set[str]) -> list[str]:
    base = module.replace(".", "/")
    candidates = [f"{base}.py", f"{base}/__init__.py"]
    pkg_dir = importer.rsplit("/", 1)[0] if "/" in importer else ""
    if pkg_dir:
        candidates += [f"{pkg_dir}/{base}.py", f"{pkg_dir}/{base}/__init__.py"]
    return [c for c in candidates if c in paths]


def _relative_import_targets(target: str, importer: str, paths: set[str]) -> list[str]:
    importer_dir = importer.rsplit("/", 1)[0] if "/" in importer else ""
    raw = normalize_path(str(Path(importer_dir) / target)) if target.startswith(".") else normalize_path(target)
    candidates = [raw]
    candidates += [raw + suffix for suffix in (".js", ".ts", ".jsx", ".tsx", "/index.js", "/index.ts")]
    return [c for c in candidates if c in paths]


def fallback_ast_ingest(source_tree: str | Path, now: int = 0) -> RepositoryModel:
    """Degraded ingestion when no NDJSON export is available.

    Walks a source tree and builds a minimal model: paths, line counts,
    lexical function/class counts, and call edges derived from import or
    include statements only. ``model.mode`` records the degraded state.
    """
    root = Path(source_tree)
    warnings: Counter = Counter()
    files: dict[str, FileRecord] = {}
    texts: dict[str, str] = {}

    paths = sorted(
        p for p in root.rglob("*")
        if p.is_file() and not any(part.startswith(".") for part in p.relative_to(root).parts)
    )
    for path in paths:
        rel = normalize_path(str(path.relative_to(root)))
        if path.suffix.lower() not in _SOURCE_SUFFIXES:
            warnings["fallback_skipped"] += 1
            continue
        try:
            data = path.read_bytes()
        except OSError:
            warnings["fallback_unreadable"] += 1
            continue
        if _looks_binary(data):
            warnings["fallback_binary"] += 1
            continue
        text = data.decode("utf-8", errors="replace")
        suffix = path.suffix.lower()
        names: list[str] = []
        functions = classes = 0
        if suffix == ".py":
            functions = len(_PY_DEF_RE.findall(text))
            classes = len(_PY_CLASS_RE.findall(text))
            names = _PY_DEF_RE.findall(text) + _PY_CLASS_RE.findall(text)
        elif suffix in {".js", ".jsx", ".ts", ".tsx", ".mjs"}:
            matches = _JS_FUNC_RE.findall(text)
            names = [a or b for a, b in matches]
            functions = len(names)
            cls = _JS_CLASS_RE.findall(text)
            classes = len(cls)
            names += cls
        files[rel] = FileRecord(
            file_id=rel,
            path=rel,
            loc=text.count("\n") + (1 if text and not text.endswith("\n") else 0),
            function_count=functions,
            class_count=classes,
            cyclomatic_complexity=0.0,
            symbols=[n for n in names if n],
        )
        texts[rel] = text

    if not files:
        raise DataFormatError("no files")

    known = set(files)
    edge_weights: Counter = Counter()
    for rel, text in texts.items():
        suffix = Path(rel).suffix.lower()
        targets: list[tuple[str, str]] = []
        if suffix == ".py":
            for frm, imp in _PY_IMPORT_RE.findall(text):
                module = frm or imp
                for target in _python_import_targets(module, rel, known):
                    targets.append((target, f"import {module}"))
        elif suffix in {".js", ".jsx", ".ts", ".tsx", ".mjs"}:
            for spec in _JS_IMPORT_RE.findall(text):
                for target in _relative_import_targets(spec, rel, known):
                    targets.append((target, f"import {spec}"))
        elif suffix in {".c", ".h", ".cc", ".cpp", ".hpp"}:
            for inc in _C_INCLUDE_RE.findall(text):
                for target in _relative_import_targets(inc, rel, known):
                    targets.append((target, f"include {inc}"))
        for target, name in targets:
            if target != rel:
                edge_weights[(rel, target, name)] += 1

    call_edges = [
        CallEdge(caller, callee, name, weight)
        for (caller, callee, name), weight in sorted(edge_weights.items())
    ]
    symbol_index: dict[str, set[str]] = {}
    for rec in files.values():
        for sym in rec.symbols:
            symbol_index.setdefault(sym, set()).add(rec.file_id)

    return RepositoryModel(
        files=files,
        call_edges=call_edges,
        symbol_index=symbol_index,
        events_by_file={},
        now=now,
        mode="ast_fallback",
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Snapshot persistence
# ---------------------------------------------------------------------------

def _snapshot_payload(model: RepositoryModel) -> dict:
    return {
        "now": model.now,
        "mode": model.mode,
        "warnings": dict(sorted(model.warnings.items())),
        "files": [
            {
                "id": rec.file_id,
                "path": rec.path,
                "loc": rec.loc,
                "functions": rec.function_count,
                "classes": rec.class_count,
                "complexity": rec.cyclomatic_complexity,
                "symbols": rec.symbols,
                "age_days": rec.age_days,
                "first_commit_ts": rec.first_commit_ts,
            }
            for _, rec in sorted(model.files.items())
        ],
        "calls": [
            [e.caller_file_id, e.callee_file_id, e.call_name, e.weight]
            for e in sorted(model.call_edges, key=lambda e: (e.caller_file_id, e.callee_file_id, e.call_name))
        ],
        "events": [
            [e.file_id, e.timestamp, e.author_id]
            for fid in sorted(model.events_by_file)
            for e in model.events_by_file[fid]
        ],
    }


def snapshot_hash(model: RepositoryModel) -> str:
    canonical = json.dumps(_snapshot_payload(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_snapshot(model: RepositoryModel, path: str | Path) -> str:
    """Persist the model as canonical JSON; returns the content hash."""
    payload = _snapshot_payload(model)
    digest = snapshot_hash(model)
    document = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "content_hash": digest,
        **payload,
    }
    Path(path).write_text(json.dumps(document, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
    return digest


def load_snapshot(path: str | Path) -> RepositoryModel:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"unreadable snapshot {path}: {exc}") from exc
    if document.get("format") != SNAPSHOT_FORMAT:
        raise DataFormatError(f"not an {SNAPSHOT_FORMAT} file: {path}")
    if document.get("version") != SNAPSHOT_VERSION:
        raise DataFormatError(f"unsupported snapshot version {document.get('version')}")

    files: dict[str, FileRecord] = {}
    for rec in document["files"]:
        files[rec["id"]] = FileRecord(
            file_id=rec["id"],
            path=rec["path"],
            loc=rec["loc"],
            function_count=rec["functions"],
            class_count=rec["classes"],
            cyclomatic_complexity=rec["complexity"],
            symbols=list(rec["symbols"]),
            age_days=rec["age_days"],
            first_commit_ts=rec["first_commit_ts"],
        )
    call_edges = [CallEdge(*row) for row in document["calls"]]
    events_by_file: dict[str, list[ChangeEvent]] = {}
    for fid, ts, author in document["events"]:
        events_by_file.setdefault(fid, []).append(ChangeEvent(fid, ts, author))
    symbol_index: dict[str, set[str]] = {}
    for rec in files.values():
        for sym in rec.symbols:
            symbol_index.setdefault(sym, set()).add(rec.file_id)

    model = RepositoryModel(
        files=files,
        call_edges=call_edges,
        symbol_index=symbol_index,
        events_by_file=events_by_file,
        now=document["now"],
        mode=document["mode"],
        warnings=Counter(document["warnings"]),
    )
    if snapshot_hash(model) != document["content_hash"]:
        raise DataFormatError(f"corrupt snapshot (content hash mismatch): {path}")
    return model


def read_lines(path: str | Path) -> TextIO:
    """Open an NDJSON input for streaming reads."""
    return open(path, "r", encoding="utf-8")
