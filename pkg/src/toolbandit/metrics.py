"""Multiset-matching precision/recall/F1 and stream-level aggregates."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class MultisetMetrics:
    precision: float
    recall: float
    f1: float
    matched: int
    predicted_size: int
    gt_size: int


def multiset_match(predicted: Iterable, ground_truth: Iterable) -> MultisetMetrics:
    """Match two action multisets; each ground-truth occurrence matches at most once.

    Empty ground truth is degenerate: recall is 1.0 by convention, and an
    empty prediction on top of that scores a perfect 1.0 across the board.
    """
    pred = Counter(predicted)
    gt = Counter(ground_truth)
    matched = sum(min(n, gt[a]) for a, n in pred.items())
    n_pred = sum(pred.values())
    n_gt = sum(gt.values())

    if n_gt == 0 and n_pred == 0:
        return MultisetMetrics(1.0, 1.0, 1.0, 0, 0, 0)
    precision = matched / n_pred if n_pred > 0 else 0.0
    recall = matched / n_gt if n_gt > 0 else 1.0
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
    return MultisetMetrics(precision, recall, f1, matched, n_pred, n_gt)


def macro_average(results: Sequence[MultisetMetrics]) -> MultisetMetrics:
    """Unweighted mean of per-episode P/R/F1; count fields are summed totals."""
    if not results:
        raise ValueError("macro_average over an empty result list")
    p = float(np.mean([r.precision for r in results]))
    r = float(np.mean([r.recall for r in results]))
    f = float(np.mean([r.f1 for r in results]))
    return MultisetMetrics(
        p,
        r,
        f,
        sum(m.matched for m in results),
        sum(m.predicted_size for m in results),
        sum(m.gt_size for m in results),
    )


def running_average(series: Sequence[float]) -> list[float]:
    """Element i is the mean of series[0..i]."""
    if len(series) == 0:
        return []
    csum = np.cumsum(np.asarray(series, dtype=np.float64))
    return list(csum / np.arange(1, len(series) + 1))


def optimal_rate(history: Iterable[tuple]) -> float:
    """Fraction of (chosen, optimal) pairs that agree. Empty history rates 0."""
    pairs = list(history)
    if not pairs:
        return 0.0
    hits = sum(1 for chosen, optimal in pairs if chosen == optimal)
    return hits / len(pairs)
