"""Shared fixtures and the acceptance-summary terminal hook."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from impactrank.ingest import ingest_history, ingest_ndjson

# ---------------------------------------------------------------------------
# Acceptance summary: one PASS/FAIL line per criterion after the run
# ---------------------------------------------------------------------------

ACCEPTANCE_NAMES = {
    1: "attention-math oracle equivalence",
    2: "softmax/stochasticity suite",
    3: "finite-difference gradient check",
    4: "ablation reduction identity",
    5: "synthetic-corpus learning check",
    6: "pagerank power-iteration oracle",
    7: "determinism and checkpoint round-trip",
    8: "metric correctness vs brute force",
    9: "pipeline end-to-end",
}

_acceptance_outcomes: dict[int, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py::test_c" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::test_c", 1)[-1]
    number = int(name.split("_", 1)[0])
    _acceptance_outcomes[number] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(ACCEPTANCE_NAMES):
        outcome = _acceptance_outcomes.get(number, "NOT RUN")
        name = ACCEPTANCE_NAMES[number]
        terminalreporter.write_line(f"criterion {number} ({name}): {outcome}")


# ---------------------------------------------------------------------------
# A 30-file fixture repository in NDJSON form
# ---------------------------------------------------------------------------

NOW = 1_700_000_000
DAY = 86_400

TRUTH_FILES = ("exec_local", "test_exec_local", "test_exec_workers")


def _file(fid, path, loc, funcs, classes, cx, age_days):
    return {
        "id": fid,
        "path": path,
        "loc": loc,
        "functions": funcs,
        "classes": classes,
        "complexity": cx,
        "first_commit_ts": NOW - age_days * DAY,
    }


def fixture_repository() -> dict[str, list[dict]]:
    """NDJSON records for a small executor-centric repository."""
    files = [
        _file("exec_local", "executors/local_executor.py", 420, 18, 2, 34.0, 900),
        _file("exec_base", "executors/base_executor.py", 310, 12, 1, 22.0, 1200),
        _file("exec_celery", "executors/celery_executor.py", 510, 20, 2, 40.0, 1100),
        _file("test_exec_local", "tests/executors/test_local_executor.py", 380, 22, 1, 12.0, 880),
        _file("test_exec_workers", "tests/executors/test_local_executor_check_workers.py", 190, 9, 0, 6.0, 400),
        _file("sched_job", "scheduler/scheduler_job.py", 880, 30, 3, 78.0, 1300),
        _file("sched_loop", "scheduler/event_loop.py", 330, 14, 1, 25.0, 1000),
        _file("api_routes", "api/routes.py", 260, 16, 0, 18.0, 700),
        _file("api_views", "api/views.py", 410, 19, 2, 30.0, 720),
        _file("db_session", "db/session.py", 150, 8, 1, 9.0, 1400),
        _file("db_models", "db/models.py", 620, 10, 9, 20.0, 1350),
        _file("util_memory", "utils/process_memory.py", 120, 6, 0, 7.0, 300),
        _file("util_log", "utils/log_setup.py", 90, 4, 0, 4.0, 1500),
        _file("util_config", "utils/configuration.py", 480, 15, 1, 26.0, 1450),
        _file("cli_main", "cli/main.py", 210, 9, 0, 13.0, 800),
        _file("dag_core", "models/dag.py", 990, 41, 4, 95.0, 1480),
        _file("dag_run", "models/dagrun.py", 610, 25, 2, 55.0, 1420),
        _file("task_instance", "models/taskinstance.py", 870, 37, 3, 88.0, 1410),
        _file("serial_dag", "serialization/serialized_dag.py", 440, 17, 2, 33.0, 980),
        _file("www_app", "www/app.py", 230, 10, 1, 11.0, 760),
    ] + [
        _file(f"misc_{i:02d}", f"providers/pkg_{i:02d}/hooks/misc_hook_{i:02d}.py", 100 + 13 * i, 5, 1, 8.0, 600 + 10 * i)
        for i in range(10)
    ]

    symbols = []
    for fid, names in {
        "exec_local": ["LocalExecutor", "spawn_worker", "check_workers", "freeze_heap"],
        "exec_base": ["BaseExecutor", "queue_command"],
        "exec_celery": ["CeleryExecutor", "send_task"],
        "test_exec_local": ["TestLocalExecutor", "test_memory_spike", "test_spawn_worker"],
        "test_exec_workers": ["test_check_workers_recycled"],
        "sched_job": ["SchedulerJob", "run_scheduler_loop"],
        "sched_loop": ["EventLoop", "poll_once"],
        "api_routes": ["register_routes", "health"],
        "api_views": ["TaskView", "DagView"],
        "db_session": ["create_session", "provide_session"],
        "db_models": ["Base", "Connection"],
        "util_memory": ["rss_bytes", "gc_stats"],
        "util_log": ["configure_logging"],
        "util_config": ["ConfigLoader", "getboolean"],
        "cli_main": ["main", "parse_args"],
        "dag_core": ["DAG", "topological_sort"],
        "dag_run": ["DagRun", "update_state"],
        "task_instance": ["TaskInstance", "run_raw_task"],
        "serial_dag": ["SerializedDAG", "to_dict"],
        "www_app": ["create_app"],
    }.items():
        symbols += [{"file_id": fid, "symbol": s, "kind": "def"} for s in names]

    calls = [
        {"caller_file": "exec_local", "callee_file": "exec_base", "name": "BaseExecutor.queue_command"},
        {"caller_file": "exec_local", "callee_file": "util_memory", "name": "gc_stats"},
        {"caller_file": "exec_local", "callee_file": "util_log", "name": "configure_logging"},
        {"caller_file": "exec_celery", "callee_file": "exec_base", "name": "BaseExecutor.queue_command"},
        {"caller_file": "test_exec_local", "callee_file": "exec_local", "name": "LocalExecutor.spawn_worker"},
        {"caller_file": "test_exec_local", "callee_file": "exec_local", "name": "freeze_heap"},
        {"caller_file": "test_exec_workers", "callee_file": "exec_local", "name": "check_workers"},
        {"caller_file": "sched_job", "callee_file": "exec_local", "name": "LocalExecutor.spawn_worker"},
        {"caller_file": "sched_job", "callee_file": "exec_base", "name": "BaseExecutor.queue_command"},
        {"caller_file": "sched_job", "callee_file": "dag_run", "name": "DagRun.update_state"},
        {"caller_file": "sched_loop", "callee_file": "sched_job", "name": "run_scheduler_loop"},
        {"caller_file": "api_routes", "callee_file": "www_app", "name": "app.get"},
        {"caller_file": "api_routes", "callee_file": "www_app", "name": "app.post"},
        {"caller_file": "api_views", "callee_file": "db_session", "name": "session.query"},
        {"caller_file": "dag_run", "callee_file": "db_session", "name": "session.commit"},
        {"caller_file": "task_instance", "callee_file": "db_session", "name": "session.execute"},
        {"caller_file": "task_instance", "callee_file": "dag_core", "name": "DAG.topological_sort"},
        {"caller_file": "serial_dag", "callee_file": "dag_core", "name": "DAG.topological_sort"},
        {"caller_file": "cli_main", "callee_file": "sched_job", "name": "run_scheduler_loop"},
        {"caller_file": "www_app", "callee_file": "util_config", "name": "ConfigLoader.getboolean"},
    ]

    history = []
    authors = ("ana", "bo", "chen")
    for i, rec in enumerate(files):
        touches = 2 + (i * 7) % 5
        for t in range(touches):
            history.append(
                {
                    "ts": NOW - (20 + 31 * t + 3 * i) * DAY,
                    "author": authors[(i + t) % len(authors)],
                    "paths": [rec["path"]],
                }
            )
    return {"files": files, "symbols": symbols, "calls": calls, "history": history}


def write_fixture_repo(directory: Path) -> dict[str, Path]:
    """Write the fixture repository NDJSON inputs; returns the paths."""
    data = fixture_repository()
    paths = {}
    for name in ("files", "symbols", "calls", "history"):
        path = directory / f"{name}.ndjson"
        path.write_text("".join(json.dumps(rec) + "\n" for rec in data[name]), encoding="utf-8")
        paths[name] = path
    return paths


@pytest.fixture
def fixture_model():
    data = fixture_repository()
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


@pytest.fixture
def repo_paths(tmp_path):
    return write_fixture_repo(tmp_path)
