"""Synthetic labeled corpora with a planted feature-interaction rule.

Ground-truth files are exactly those with low recent churn AND high
dependency centrality, a conjunction a fixed linear baseline cannot express:
negatives populate the other three quadrants, and the deterministic score is
dominated by semantic signals that are deliberately uninformative about the
rule. Used by the learning acceptance check and the training demo.
"""

from __future__ import annotations

import numpy as np

from .features import FEATURE_DIM
from .ingest import ChangeRequest
from .ranking import DeterministicWeights, minmax_normalize
from .training import LabeledCase

CHURN_COLUMN = 1       # changes_last_12mo
CENTRALITY_COLUMN = 8  # pagerank

_BASE_TS = 1_600_000_000
_CHANGE_TYPES = ("bugfix", "feature", "refactor")


def make_interaction_corpus(
    seed: int = 0,
    n_files: int = 200,
    n_cases: int = 60,
    candidates_per_case: int = 45,
    positives_per_case: int = 3,
    weights: DeterministicWeights | None = None,
) -> list[LabeledCase]:
    """Generate labeled cases whose positives follow the planted rule.

    Per-file churn and centrality are fixed across cases; per-case semantic
    signals (bm25, hits, embedding) are resampled so the deterministic
    ranking, computed with the real weighted-linear scorer over min-max
    normalized signals, places positives mid-pack on average.
    """
    rng = np.random.default_rng(seed)
    weights = weights or DeterministicWeights()

    churn = rng.integers(0, 21, size=n_files).astype(float)
    centrality = rng.uniform(0.0, 1.0, size=n_files)
    low_churn = churn <= np.quantile(churn, 0.35)
    high_central = centrality >= np.quantile(centrality, 0.65)
    planted = np.flatnonzero(low_churn & high_central)
    others = np.flatnonzero(~(low_churn & high_central))
    if len(planted) < positives_per_case:
        raise ValueError("planted pool too small; increase n_files or loosen thresholds")

    total_changes = churn + rng.integers(0, 30, size=n_files)
    contributor = rng.uniform(0.2, 1.0, size=n_files)
    days_since = np.clip(400.0 - 15.0 * churn + rng.normal(0, 40, n_files), 1.0, None)
    loc = rng.integers(20, 2000, size=n_files).astype(float)
    functions = rng.integers(0, 40, size=n_files).astype(float)
    classes = rng.integers(0, 8, size=n_files).astype(float)
    complexity = rng.uniform(1.0, 60.0, size=n_files)
    in_degree = np.round(centrality * 20 + rng.uniform(0, 3, n_files))
    out_degree = rng.integers(0, 15, size=n_files).astype(float)
    fan_in = in_degree * rng.uniform(1.0, 3.0, size=n_files)
    fan_out = out_degree * rng.uniform(1.0, 2.0, size=n_files)
    age = rng.uniform(100.0, 3000.0, size=n_files)

    cases: list[LabeledCase] = []
    for case_no in range(n_cases):
        pos = rng.choice(planted, size=positives_per_case, replace=False)
        neg = rng.choice(others, size=candidates_per_case - positives_per_case, replace=False)
        candidates = np.concatenate([pos, neg])
        rng.shuffle(candidates)
        truth = {i for i, f in enumerate(candidates) if f in set(pos.tolist())}

        n = len(candidates)
        is_pos = np.array([i in truth for i in range(n)])
        bm25 = np.where(
            is_pos,
            rng.normal(1.0, 0.25, n),
            rng.normal(0.8, 0.45, n),
        )
        # a handful of semantic decoys outrank the true files deterministically
        decoys = (~is_pos) & (rng.uniform(size=n) < 0.15)
        bm25 = np.clip(np.where(decoys, rng.normal(2.2, 0.3, n), bm25), 0.0, None)
        hit_fraction = np.clip(bm25 / 3.0 + rng.normal(0, 0.05, n), 0.0, 1.0)
        embedding = np.clip(bm25 / 4.0 + rng.normal(0, 0.08, n), -1.0, 1.0)
        path_hits = rng.poisson(np.clip(bm25, 0.05, None))
        symbol_hits = rng.poisson(np.clip(bm25 * 0.8, 0.05, None))
        call_hits = rng.poisson(np.clip(bm25 * 0.5, 0.05, None))
        route_hits = rng.poisson(0.1, n)
        db_hits = rng.poisson(0.1, n)

        signals = np.column_stack(
            [
                bm25,
                hit_fraction,
                path_hits,
                symbol_hits,
                call_hits,
                route_hits,
                db_hits,
                centrality[candidates],
                fan_in[candidates],
                churn[candidates],
                embedding,
            ]
        )
        deterministic = minmax_normalize(signals) @ weights.as_vector()

        change_type = _CHANGE_TYPES[case_no % len(_CHANGE_TYPES)]
        features = np.zeros((n, FEATURE_DIM))
        features[:, 0] = total_changes[candidates]
        features[:, CHURN_COLUMN] = churn[candidates]
        features[:, 2] = contributor[candidates]
        features[:, 3] = days_since[candidates]
        features[:, 4] = loc[candidates]
        features[:, 5] = functions[candidates]
        features[:, 6] = classes[candidates]
        features[:, 7] = complexity[candidates]
        features[:, CENTRALITY_COLUMN] = centrality[candidates]
        features[:, 9] = in_degree[candidates]
        features[:, 10] = out_degree[candidates]
        features[:, 11] = fan_in[candidates]
        features[:, 12] = fan_out[candidates]
        features[:, 13] = bm25
        features[:, 14] = hit_fraction
        features[:, 15] = embedding
        features[:, 16] = 1.0 if change_type == "bugfix" else 0.0
        features[:, 17] = 1.0 if change_type == "feature" else 0.0
        features[:, 18] = 1.0 if change_type == "refactor" else 0.0
        features[:, 19] = age[candidates]

        request = ChangeRequest(
            request_id=f"case-{case_no:03d}",
            text=f"synthetic change request {case_no}",
            change_type=change_type,
            timestamp=_BASE_TS + case_no * 86400,
        )
        cases.append(
            LabeledCase(
                request=request,
                features=features,
                deterministic=deterministic,
                ground_truth=truth,
                candidate_ids=[f"file_{int(f):03d}.py" for f in candidates],
            )
        )
    return cases
