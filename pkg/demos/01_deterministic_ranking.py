#!/usr/bin/env python3
"""Deterministic baseline walkthrough.

Ingests a 12-file mini repository, expands a change request into keywords,
and ranks every file by the weighted linear combination of its signals:
BM25, keyword hits, dependency PageRank, fan-in, recent churn, and the
offline embedding similarity. No learned components anywhere in this demo.
"""

from demo_repo import build_model

from impactrank.config import RunConfig
from impactrank.keywords import extract_keywords_local
from impactrank.pipeline import RepositoryIndex, parse_request, rank_request

REQUEST = "Fix LocalExecutor memory spike by applying gc.freeze"


def main():
    model = build_model()
    print(f"repository: {len(model.files)} files, {len(model.call_edges)} call edges")

    keywords = extract_keywords_local(REQUEST)
    print(f"\nchange request: {REQUEST!r}")
    print(f"keywords ({keywords.source}): {', '.join(keywords)}")

    index = RepositoryIndex(model, RunConfig())
    print("\ndependency pagerank (top 4):")
    for fid, score in sorted(index.pagerank.scores.items(), key=lambda kv: -kv[1])[:4]:
        print(f"  {score:.4f}  {model.files[fid].path}")

    result = rank_request(index, parse_request(REQUEST))
    print("\ndeterministic ranking:")
    print(f"{'rank':>4}  {'score':>8}  path")
    for rank, entry in enumerate(result.report.entries, start=1):
        print(f"{rank:>4}  {entry.final_score:>8.4f}  {entry.path}")

    print("\nThe executor module and its tests lead: their paths, symbols, and")
    print("call names hit most of the extracted keywords, and the executor file")
    print("also carries dependency centrality from the scheduler and tests.")


if __name__ == "__main__":
    main()
