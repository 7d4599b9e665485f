"""Deterministic baseline scoring and progressive candidate filtering.

The baseline score of a file is a weighted linear combination of eleven
per-file signals, each min-max normalized across the repository so the
configured weights are scale-meaningful. Progressive filtering is a single
scoring pass followed by staged top-k truncation down to the candidate set
that enters attention refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

SIGNAL_NAMES = (
    "bm25",
    "hit_fraction",
    "path_hits",
    "symbol_hits",
    "call_hits",
    "route_hits",
    "db_hits",
    "pagerank",
    "fan_in",
    "churn_recent",
    "embedding_cosine",
)

DEFAULT_STAGE_SIZES = (120, 60, 50)


@dataclass(frozen=True)
class DeterministicWeights:
    """One weight per deterministic signal; defaults are config placeholders."""

    bm25: float = 0.3
    hit_fraction: float = 0.15
    path_hits: float = 0.1
    symbol_hits: float = 0.1
    call_hits: float = 0.05
    route_hits: float = 0.025
    db_hits: float = 0.025
    pagerank: float = 0.1
    fan_in: float = 0.05
    churn_recent: float = 0.05
    embedding_cosine: float = 0.05

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "DeterministicWeights":
        unknown = set(mapping) - set(SIGNAL_NAMES)
        if unknown:
            raise ValueError(f"unknown deterministic weight(s): {sorted(unknown)}")
        return cls(**mapping)


@dataclass
class CandidateSet:
    """Filtered candidates ordered by deterministic score.

    Ties break on lexicographic path order, so the ordering is fully
    deterministic. ``stage`` names the truncation stage this set represents.
    """

    entries: list[tuple[str, float]]
    stage: str

    def file_ids(self) -> list[str]:
        return [fid for fid, _ in self.entries]

    def scores(self) -> np.ndarray:
        return np.array([score for _, score in self.entries], dtype=float)

    def __len__(self) -> int:
        return len(self.entries)


def minmax_normalize(matrix: np.ndarray) -> np.ndarray:
    """Column-wise min-max scaling to [0, 1]; constant columns map to 0."""
    matrix = np.asarray(matrix, dtype=float)
    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)
    span = hi - lo
    safe = np.where(span <= 0.0, 1.0, span)
    normalized = (matrix - lo) / safe
    normalized[:, span <= 0.0] = 0.0
    return normalized


def deterministic_score(signals: np.ndarray, weights: DeterministicWeights) -> float:
    """Dot product of normalized signals (SIGNAL_NAMES order) and weights."""
    signals = np.asarray(signals, dtype=float)
    if signals.shape != (len(SIGNAL_NAMES),):
        raise ValueError(f"expected {len(SIGNAL_NAMES)} signals, got {signals.shape}")
    return float(signals @ weights.as_vector())


def score_files(
    signal_matrix: np.ndarray,
    weights: DeterministicWeights,
) -> np.ndarray:
    """Deterministic scores for all files from a raw N x 11 signal matrix."""
    normalized = minmax_normalize(signal_matrix)
    return normalized @ weights.as_vector()


def rank_order(file_ids: list[str], paths: list[str], scores: np.ndarray) -> list[int]:
    """Indices sorting by score descending, path ascending on ties."""
    order = sorted(range(len(file_ids)), key=lambda i: (-scores[i], paths[i]))
    return order


def progressive_filter(
    scored: list[tuple[str, str, float]],
    stage_sizes: tuple[int, ...] = DEFAULT_STAGE_SIZES,
) -> CandidateSet:
    """Staged top-k truncation of ``(file_id, path, score)`` entries.

    One scoring pass, successive truncations: each stage keeps the top-k of
    the previous one, so the final set is a prefix of the full ordering.
    Repositories smaller than a stage size pass through unfiltered.
    """
    if any(b > a for a, b in zip(stage_sizes, stage_sizes[1:])):
        raise ValueError(f"stage sizes must be monotone decreasing, got {stage_sizes}")
    if not 40 <= stage_sizes[-1] <= 60:
        raise ValueError(f"final stage size must lie in [40, 60], got {stage_sizes[-1]}")
    ordered = sorted(scored, key=lambda item: (-item[2], item[1]))
    stage_names = ("s120", "s60", "s40")
    survivors = ordered
    for size in stage_sizes:
        survivors = survivors[:size]
    stage = stage_names[min(len(stage_sizes), len(stage_names)) - 1]
    return CandidateSet(entries=[(fid, score) for fid, _, score in survivors], stage=stage)
