"""Ranking reports, recall metrics, and plot-ready analysis exports.

Recall@K is reported two ways, matching the two usages in the literature:
the per-case fraction of ground-truth files inside the top K, and the strict
all-found indicator (every ground-truth file within the top K). Both are
labeled distinctly everywhere to avoid ambiguity.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_HEATMAP_TOP_N = 25


@dataclass
class ReportEntry:
    file_id: str
    path: str
    final_score: float
    deterministic: float
    adjustment: float
    pagerank_term: float


@dataclass
class RankingReport:
    """Final scored ranking with per-file score decomposition."""

    request_id: str
    entries: list[ReportEntry]
    recall10: float | None = None
    recall50: float | None = None
    all_found10: bool | None = None
    all_found50: bool | None = None
    reciprocal_rank: float | None = None
    attention_ref: str | None = None
    metadata: dict = field(default_factory=dict)

    def ranked_ids(self) -> list[str]:
        return [e.file_id for e in self.entries]

    def attach_metrics(self, truth: set[str]) -> None:
        ranked = self.ranked_ids()
        self.recall10, self.all_found10 = recall_at_k(ranked, truth, 10)
        self.recall50, self.all_found50 = recall_at_k(ranked, truth, 50)
        self.reciprocal_rank = reciprocal_rank(ranked, truth)

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "ranking": [
                {
                    "rank": i + 1,
                    "file_id": e.file_id,
                    "path": e.path,
                    "final_score": e.final_score,
                    "deterministic": e.deterministic,
                    "adjustment": e.adjustment,
                    "pagerank_term": e.pagerank_term,
                }
                for i, e in enumerate(self.entries)
            ],
            "recall10": self.recall10,
            "recall50": self.recall50,
            "all_found10": self.all_found10,
            "all_found50": self.all_found50,
            "reciprocal_rank": self.reciprocal_rank,
            "attention_ref": self.attention_ref,
            "metadata": self.metadata,
        }


def build_report(
    request_id: str,
    file_ids: list[str],
    paths: list[str],
    final_scores: np.ndarray,
    deterministic: np.ndarray,
    adjustments: np.ndarray,
    pagerank_terms: np.ndarray,
    top_k: int | None = None,
) -> RankingReport:
    """Assemble a report sorted by final score, path-lexicographic tie-break."""
    order = sorted(range(len(file_ids)), key=lambda i: (-final_scores[i], paths[i]))
    if top_k is not None:
        order = order[:top_k]
    entries = [
        ReportEntry(
            file_id=file_ids[i],
            path=paths[i],
            final_score=float(final_scores[i]),
            deterministic=float(deterministic[i]),
            adjustment=float(adjustments[i]),
            pagerank_term=float(pagerank_terms[i]),
        )
        for i in order
    ]
    return RankingReport(request_id=request_id, entries=entries)


def recall_at_k(ranked: list, truth: set, k: int) -> tuple[float, bool]:
    """Fractional recall and the strict all-found indicator at cutoff k."""
    if not truth:
        raise ValueError("ground truth is empty")
    top = set(ranked[:k])
    found = len(truth & top)
    return found / len(truth), found == len(truth)


def reciprocal_rank(ranked: list, truth: set) -> float:
    """1 / rank of the first relevant item; 0.0 when none is ranked."""
    for position, item in enumerate(ranked, start=1):
        if item in truth:
            return 1.0 / position
    return 0.0


def mrr(cases: list[tuple[list, set]]) -> float:
    """Mean reciprocal rank over (ranked, truth) cases; empty truths skipped."""
    values = []
    for ranked, truth in cases:
        if not truth:
            log.warning("skipping case with empty ground truth")
            continue
        values.append(reciprocal_rank(ranked, truth))
    return float(np.mean(values)) if values else 0.0


def mean_recall(cases: list[tuple[list, set]], k: int) -> tuple[float, float]:
    """Mean fractional recall@k and mean all-found@k over cases."""
    fractions, found = [], []
    for ranked, truth in cases:
        if not truth:
            log.warning("skipping case with empty ground truth")
            continue
        frac, all_found = recall_at_k(ranked, truth, k)
        fractions.append(frac)
        found.append(1.0 if all_found else 0.0)
    if not fractions:
        return 0.0, 0.0
    return float(np.mean(fractions)), float(np.mean(found))


def attention_coverage(mass: np.ndarray, n_values: list[int] | None = None) -> list[tuple[int, float]]:
    """Cumulative fraction of total mass captured by the top n items.

    Mass is sorted descending before accumulation; a zero total yields all-0
    fractions with a warning.
    """
    mass = np.asarray(mass, dtype=float)
    if (mass < 0).any():
        raise ValueError("mass vector must be non-negative")
    total = mass.sum()
    ordered = np.sort(mass)[::-1]
    cumulative = np.cumsum(ordered)
    if n_values is None:
        n_values = list(range(1, len(mass) + 1))
    if total <= 0.0:
        log.warning("coverage of a zero mass vector; emitting zeros")
        return [(n, 0.0) for n in n_values]
    return [(n, float(cumulative[min(n, len(mass)) - 1] / total)) for n in n_values]


def export_heatmap(attention: np.ndarray, labels: list[str], top_n: int, path: str | Path) -> None:
    """Write the top_n x top_n block of a rank-ordered attention matrix.

    ``attention`` and ``labels`` must already be in rank order; the header
    row carries the file paths of the retained block.
    """
    n = min(top_n, len(labels))
    block = np.asarray(attention, dtype=float)[:n, :n]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["file"] + list(labels[:n]))
        for label, row in zip(labels[:n], block):
            writer.writerow([label] + [f"{v:.12g}" for v in row])


def export_score_decay(report: RankingReport, limit: int = 50) -> list[tuple[int, float]]:
    """(rank, final score) series for ranks 1..min(N, limit)."""
    return [(i + 1, e.final_score) for i, e in enumerate(report.entries[:limit])]


def write_decay_csv(report: RankingReport, path: str | Path, limit: int = 50) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rank", "final_score"])
        for rank, score in export_score_decay(report, limit):
            writer.writerow([rank, f"{score:.12g}"])


def write_coverage_csv(
    centrality: np.ndarray,
    column_mass: np.ndarray,
    path: str | Path,
) -> None:
    """Cumulative coverage of both candidate mass definitions side by side."""
    pagerank_cov = attention_coverage(centrality)
    column_cov = attention_coverage(column_mass)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n", "pagerank_mass_fraction", "attention_mass_fraction"])
        for (n, pr_frac), (_, col_frac) in zip(pagerank_cov, column_cov):
            writer.writerow([n, f"{pr_frac:.12g}", f"{col_frac:.12g}"])


def write_report_bundle(
    out_dir: str | Path,
    report: RankingReport,
    averaged_attention: np.ndarray,
    per_head_attention: np.ndarray,
    centrality: np.ndarray,
    order_indices: list[int],
    candidate_paths: list[str],
    top_n: int = DEFAULT_HEATMAP_TOP_N,
) -> list[str]:
    """Write the full analysis bundle; returns the files written.

    Layout: report.json, heatmap.csv, decay.csv, coverage.csv, and one
    heads/head_<i>.csv per attention head. Attention inputs are in candidate
    order; ``order_indices`` maps rank position to candidate index.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "heads").mkdir(exist_ok=True)
    order = np.asarray(order_indices, dtype=int)
    labels = [candidate_paths[i] for i in order]

    written = []
    report.attention_ref = "heatmap.csv"
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append("report.json")

    reordered = np.asarray(averaged_attention)[np.ix_(order, order)]
    export_heatmap(reordered, labels, top_n, out / "heatmap.csv")
    written.append("heatmap.csv")

    for head in range(per_head_attention.shape[0]):
        head_matrix = np.asarray(per_head_attention[head])[np.ix_(order, order)]
        name = f"heads/head_{head + 1}.csv"
        export_heatmap(head_matrix, labels, top_n, out / name)
        written.append(name)

    write_decay_csv(report, out / "decay.csv")
    written.append("decay.csv")

    column_mass = np.asarray(averaged_attention).sum(axis=0)
    write_coverage_csv(np.asarray(centrality)[order], column_mass[order], out / "coverage.csv")
    written.append("coverage.csv")
    return written
