#!/usr/bin/env python3
"""End-to-end CLI session on the mini repository.

Materializes the NDJSON exports in a temp directory, then drives the same
entry points the installed `impactrank` command exposes: index a snapshot,
train on a small labeled corpus, rank a maintenance request against the
trained checkpoint, and export the attention analysis bundle for it.
"""

import json
import tempfile
from pathlib import Path

from demo_repo import write_ndjson

from impactrank.cli import main as impactrank

REQUEST = "Fix LocalExecutor memory spike by applying gc.freeze"

CORPUS = [
    ("case-exec", REQUEST, "bugfix", ["exec_local", "test_exec", "test_workers"]),
    ("case-sched", "SchedulerJob loop polls too often", "bugfix", ["sched"]),
    ("case-api", "Add health route to web app", "feature", ["api", "webapp"]),
    ("case-db", "Session commit retries", "bugfix", ["db", "taskrun"]),
    ("case-dag", "Refactor DAG topological sort", "refactor", ["dag"]),
]


def run(argv):
    print(f"\n$ impactrank {' '.join(argv)}")
    code = impactrank(argv)
    assert code == 0, f"exit code {code}"


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        inputs = write_ndjson(tmp / "inputs")
        snapshot = tmp / "snapshot.json"
        checkpoint = tmp / "model.ckpt"
        corpus = tmp / "corpus.ndjson"
        corpus.write_text(
            "\n".join(
                json.dumps({
                    "request": {"request_id": rid, "text": text,
                                "change_type": kind, "timestamp": 1_690_000_000 + i * 86_400},
                    "positives": positives,
                })
                for i, (rid, text, kind, positives) in enumerate(CORPUS)
            ) + "\n",
            encoding="utf-8",
        )

        run(["index",
             "--files", str(inputs["files"]), "--symbols", str(inputs["symbols"]),
             "--calls", str(inputs["calls"]), "--history", str(inputs["history"]),
             "--now", "1700000000", "--snapshot", str(snapshot)])

        run(["train", "--snapshot", str(snapshot), "--corpus", str(corpus),
             "--model", str(checkpoint), "--seed", "13", "--out-dir", str(tmp / "train_out")])

        run(["rank", "--snapshot", str(snapshot), "--model", str(checkpoint),
             "--request", REQUEST, "--top-k", "8"])

        bundle = tmp / "bundle"
        run(["explain", "--snapshot", str(snapshot), "--model", str(checkpoint),
             "--request", REQUEST, "--out-dir", str(bundle), "--top-n", "8"])

        print("\nbundle contents:")
        for path in sorted(bundle.rglob("*")):
            if path.is_file():
                print(f"  {path.relative_to(bundle)}  ({path.stat().st_size} bytes)")
        decay = (bundle / "decay.csv").read_text().strip().splitlines()
        print("\nscore decay (first 5 ranks):")
        for line in decay[:6]:
            print(f"  {line}")


if __name__ == "__main__":
    main()
