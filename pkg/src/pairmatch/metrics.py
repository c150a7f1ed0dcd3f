"""Evaluation metrics: classification ACC and AUC, plus top-1 ranking scores.

AUC follows the Mann-Whitney convention (ties count half) and is computed
from rank statistics in O(n log n).  Ranking metrics group scored
candidates by query; a query counts as answered iff its top-scored
candidate reaches the score threshold, with ties broken by candidate id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


def accuracy(predictions, golds) -> float:
    predictions = np.asarray(predictions)
    golds = np.asarray(golds)
    if predictions.shape != golds.shape:
        raise DataError(f"accuracy: shapes {predictions.shape} and {golds.shape} differ")
    if predictions.size == 0:
        raise DataError("accuracy: empty input")
    return float(np.mean(predictions == golds))


def auc(scores, golds) -> float:
    """P(score of a random positive > score of a random negative), ties 1/2.

    Computed as (rank sum of positives - n_pos(n_pos+1)/2) / (n_pos*n_neg)
    using average ranks, which equals the exhaustive pairwise count
    exactly (both are sums of halves).
    """
    scores = np.asarray(scores, dtype=np.float64)
    golds = np.asarray(golds)
    if scores.shape != golds.shape or scores.ndim != 1:
        raise DataError("auc: scores and golds must be equal-length vectors")
    pos = golds == 1
    n_pos = int(pos.sum())
    n_neg = scores.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("auc: need at least one positive and one negative")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class ScoredPair:
    """One (query, candidate) row of a ranking evaluation."""

    query_id: str
    candidate_id: str
    score: float
    gold: int


def rank_at_1(pairs: list[ScoredPair], threshold: float = 0.5
              ) -> tuple[float, float, float]:
    """(Precision@1, Recall@1, F1@1) over query groups.

    P@1 = correctly answered / answered, R@1 = correctly answered /
    queries with any gold-positive candidate, F1 their harmonic mean
    (zero when both are undefined or zero).
    """
    if not pairs:
        raise DataError("rank_at_1: no scored pairs")
    groups: dict[str, list[ScoredPair]] = {}
    for p in pairs:
        groups.setdefault(p.query_id, []).append(p)
    answered = 0
    correct = 0
    with_positive = 0
    for members in groups.values():
        top = min(members, key=lambda p: (-p.score, p.candidate_id))
        if any(p.gold == 1 for p in members):
            with_positive += 1
        if top.score >= threshold:
            answered += 1
            if top.gold == 1:
                correct += 1
    precision = correct / answered if answered else 0.0
    recall = correct / with_positive if with_positive else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1
