"""A miniature repository used by the demo scripts.

Twelve files around an executor subsystem: NDJSON records in the same shape
the indexer consumes, plus a change history. Import `build_model()` for an
in-memory model or `write_ndjson(dir)` to materialize input files.
"""

import json
from pathlib import Path

from impactrank.ingest import ingest_history, ingest_ndjson

NOW = 1_700_000_000
DAY = 86_400

FILES = [
    ("exec_local", "executors/local_executor.py", 420, 18, 2, 34.0, 900),
    ("exec_base", "executors/base_executor.py", 310, 12, 1, 22.0, 1200),
    ("test_exec", "tests/test_local_executor.py", 380, 22, 1, 12.0, 880),
    ("test_workers", "tests/test_local_executor_check_workers.py", 190, 9, 0, 6.0, 400),
    ("sched", "scheduler/scheduler_job.py", 880, 30, 3, 78.0, 1300),
    ("api", "api/routes.py", 260, 16, 0, 18.0, 700),
    ("db", "db/session.py", 150, 8, 1, 9.0, 1400),
    ("memutil", "utils/process_memory.py", 120, 6, 0, 7.0, 300),
    ("config", "utils/configuration.py", 480, 15, 1, 26.0, 1450),
    ("dag", "models/dag.py", 990, 41, 4, 95.0, 1480),
    ("taskrun", "models/taskinstance.py", 870, 37, 3, 88.0, 1410),
    ("webapp", "www/app.py", 230, 10, 1, 11.0, 760),
]

SYMBOLS = {
    "exec_local": ["LocalExecutor", "spawn_worker", "check_workers", "freeze_heap"],
    "exec_base": ["BaseExecutor", "queue_command"],
    "test_exec": ["TestLocalExecutor", "test_memory_spike"],
    "test_workers": ["test_check_workers_recycled"],
    "sched": ["SchedulerJob", "run_scheduler_loop"],
    "api": ["register_routes", "health"],
    "db": ["create_session", "provide_session"],
    "memutil": ["rss_bytes", "gc_stats"],
    "config": ["ConfigLoader", "getboolean"],
    "dag": ["DAG", "topological_sort"],
    "taskrun": ["TaskInstance", "run_raw_task"],
    "webapp": ["create_app"],
}

CALLS = [
    ("exec_local", "exec_base", "BaseExecutor.queue_command"),
    ("exec_local", "memutil", "gc_stats"),
    ("test_exec", "exec_local", "LocalExecutor.spawn_worker"),
    ("test_exec", "exec_local", "freeze_heap"),
    ("test_workers", "exec_local", "check_workers"),
    ("sched", "exec_local", "LocalExecutor.spawn_worker"),
    ("sched", "exec_base", "BaseExecutor.queue_command"),
    ("api", "webapp", "app.get"),
    ("api", "webapp", "app.post"),
    ("taskrun", "db", "session.commit"),
    ("taskrun", "dag", "DAG.topological_sort"),
    ("webapp", "config", "ConfigLoader.getboolean"),
]


def records():
    files = [
        {"id": fid, "path": path, "loc": loc, "functions": fn, "classes": cls,
         "complexity": cx, "first_commit_ts": NOW - age * DAY}
        for fid, path, loc, fn, cls, cx, age in FILES
    ]
    symbols = [
        {"file_id": fid, "symbol": name, "kind": "def"}
        for fid, names in SYMBOLS.items() for name in names
    ]
    calls = [
        {"caller_file": src, "callee_file": dst, "name": name}
        for src, dst, name in CALLS
    ]
    path_of = {fid: path for fid, path, *_ in FILES}
    history = []
    authors = ("ana", "bo", "chen")
    for i, fid in enumerate(path_of):
        for t in range(2 + (i * 7) % 4):
            history.append({"ts": NOW - (25 + 40 * t + 5 * i) * DAY,
                            "author": authors[(i + t) % 3],
                            "paths": [path_of[fid]]})
    return {"files": files, "symbols": symbols, "calls": calls, "history": history}


def build_model():
    data = records()
    model = ingest_ndjson(
        (json.dumps(r) for r in data["files"]),
        (json.dumps(r) for r in data["symbols"]),
        (json.dumps(r) for r in data["calls"]),
        now=NOW,
    )
    model.events_by_file.update(
        ingest_history((json.dumps(r) for r in data["history"]), model.path_to_id, model.warnings)
    )
    return model


def write_ndjson(directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = records()
    paths = {}
    for name in ("files", "symbols", "calls", "history"):
        path = directory / f"{name}.ndjson"
        path.write_text("".join(json.dumps(r) + "\n" for r in data[name]), encoding="utf-8")
        paths[name] = path
    return paths
