#!/usr/bin/env python3
"""Learning a feature interaction the linear baseline cannot express.

Generates a synthetic corpus where the impacted files are exactly those with
low recent churn AND high dependency centrality, trains the attention layer
with the pairwise hinge loss, and compares test-split recall against the
frozen deterministic baseline. Also prints one case's score decomposition to
show where the learned adjustments land.
"""

import numpy as np

from impactrank.synthetic import make_interaction_corpus
from impactrank.training import TrainConfig, case_scores, evaluate_recall, temporal_split, train

CHURN, CENTRALITY = 1, 8  # feature columns carrying the planted rule


def main():
    corpus = make_interaction_corpus(seed=1234, n_files=200, n_cases=60)
    train_split, val_split, test_split = temporal_split(corpus)
    print(f"corpus: {len(corpus)} cases "
          f"({len(train_split)} train / {len(val_split)} val / {len(test_split)} test), "
          f"{corpus[0].features.shape[0]} candidates per case")

    print(f"\nbaseline (deterministic only) test recall@10: "
          f"{evaluate_recall(test_split, None, 10):.3f}")

    config = TrainConfig(seed=99, epochs=60)
    model, log_rows = train(corpus, config)
    for row in log_rows[:: max(1, len(log_rows) // 6)]:
        print(f"  epoch {row['epoch']:>3}: loss {row['loss']:.4f}  "
              f"val recall@50 {row['val_recall50']:.2f}")

    refined = evaluate_recall(test_split, model, 10)
    print(f"\ntrained test recall@10: {refined:.3f}")

    case = test_split[0]
    final, out = case_scores(case, model)
    order = np.argsort(-final)
    print(f"\ncase {case.request.request_id}: top 10 after refinement "
          f"(+ marks ground truth)")
    print(f"{'rank':>4}  {'determ':>8}  {'adjust':>8}  {'churn':>6}  {'central':>8}")
    for rank, i in enumerate(order[:10], start=1):
        mark = "+" if i in case.ground_truth else " "
        print(f"{rank:>4}{mark} {case.deterministic[i]:>8.4f}  {out.adjustments[i]:>8.4f}  "
              f"{case.features[i, CHURN]:>6.0f}  {case.features[i, CENTRALITY]:>8.3f}")

    print("\nThe adjustments concentrate on low-churn, high-centrality candidates:")
    print("a conjunction no reweighting of the linear baseline can represent.")


if __name__ == "__main__":
    main()
