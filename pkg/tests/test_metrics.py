"""Multiset metric tests against an independent counting oracle."""
from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from toolbandit.metrics import (
    MultisetMetrics,
    macro_average,
    multiset_match,
    optimal_rate,
    running_average,
)


def oracle_match(pred: list, gt: list) -> tuple[int, float, float, float]:
    """Brute-force matcher: greedily pair each prediction with an unused
    ground-truth occurrence of the same action."""
    pool = list(gt)
    matched = 0
    for p in pred:
        if p in pool:
            pool.remove(p)
            matched += 1
    precision = matched / len(pred) if pred else (1.0 if not gt else 0.0)
    recall = matched / len(gt) if gt else 1.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    if not pred and not gt:
        precision = recall = f1 = 1.0
    return matched, precision, recall, f1


def test_hand_checked_example():
    # pred {a,a,b,c} vs gt {a,b,b}: matched = 1 + 1 = 2
    m = multiset_match(["a", "a", "b", "c"], ["a", "b", "b"])
    assert m.matched == 2
    assert m.precision == pytest.approx(0.5)
    assert m.recall == pytest.approx(2 / 3)
    assert m.f1 == pytest.approx(4 / 7)


def test_identity_and_disjoint():
    same = multiset_match(["x", "y", "y"], ["y", "x", "y"])
    assert (same.precision, same.recall, same.f1) == (1.0, 1.0, 1.0)
    none = multiset_match(["a", "b"], ["c", "d"])
    assert (none.precision, none.recall, none.f1) == (0.0, 0.0, 0.0)


def test_empty_conventions():
    both = multiset_match([], [])
    assert (both.precision, both.recall, both.f1) == (1.0, 1.0, 1.0)
    empty_pred = multiset_match([], ["a"])
    assert (empty_pred.precision, empty_pred.recall, empty_pred.f1) == (0.0, 0.0, 0.0)
    empty_gt = multiset_match(["a"], [])
    assert empty_gt.recall == 1.0
    assert empty_gt.precision == 0.0
    assert empty_gt.f1 == 0.0


def test_random_pairs_match_oracle_exactly():
    rng = np.random.default_rng(7)
    vocab = [f"t{i}" for i in range(6)]
    for _ in range(100):
        pred = [vocab[i] for i in rng.integers(0, len(vocab), rng.integers(0, 9))]
        gt = [vocab[i] for i in rng.integers(0, len(vocab), rng.integers(0, 9))]
        got = multiset_match(pred, gt)
        matched, p, r, f1 = oracle_match(pred, gt)
        assert got.matched == matched
        assert got.precision == p
        assert got.recall == r
        assert got.f1 == f1


def test_bounds_and_f1_dominance():
    rng = np.random.default_rng(11)
    vocab = list(range(5))
    for _ in range(200):
        pred = list(rng.integers(0, 5, rng.integers(1, 8)))
        gt = list(rng.integers(0, 5, rng.integers(1, 8)))
        m = multiset_match(pred, gt)
        assert 0.0 <= m.precision <= 1.0
        assert 0.0 <= m.recall <= 1.0
        assert 0.0 <= m.f1 <= max(m.precision, m.recall) + 1e-12
        assert m.matched <= min(m.predicted_size, m.gt_size)
        assert (m.f1 == 0.0) == (m.matched == 0)


def test_precision_recall_swap_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pred = list(rng.integers(0, 4, rng.integers(1, 7)))
        gt = list(rng.integers(0, 4, rng.integers(1, 7)))
        assert multiset_match(pred, gt).precision == multiset_match(gt, pred).recall


def test_macro_average_is_unweighted_mean():
    a = multiset_match(["a"], ["a"])
    b = multiset_match(["b"], ["c"])
    avg = macro_average([a, b])
    assert avg.f1 == pytest.approx(0.5)
    assert avg.precision == pytest.approx(0.5)
    single = macro_average([a])
    assert single.f1 == a.f1

    rng = np.random.default_rng(5)
    batch = []
    for _ in range(100):
        pred = list(rng.integers(0, 4, rng.integers(1, 6)))
        gt = list(rng.integers(0, 4, rng.integers(1, 6)))
        batch.append(multiset_match(pred, gt))
    avg = macro_average(batch)
    assert avg.f1 == pytest.approx(sum(m.f1 for m in batch) / len(batch))
    assert avg.recall == pytest.approx(sum(m.recall for m in batch) / len(batch))


def test_macro_average_rejects_empty():
    with pytest.raises(ValueError):
        macro_average([])


def test_running_average_basics():
    assert running_average([1.0, 0.0, 1.0]) == pytest.approx([1.0, 0.5, 2 / 3])
    assert running_average([0.25] * 5) == pytest.approx([0.25] * 5)
    assert running_average([]) == []


def test_running_average_matches_prefix_oracle():
    rng = np.random.default_rng(9)
    series = list(rng.random(64))
    got = running_average(series)
    for i in range(len(series)):
        assert got[i] == pytest.approx(sum(series[: i + 1]) / (i + 1))
    # appending then truncating leaves the prefix unchanged
    extended = running_average(series + [0.123])
    assert extended[:-1] == pytest.approx(got)


def test_optimal_rate():
    assert optimal_rate([(1, 1), (2, 2)]) == 1.0
    assert optimal_rate([(1, 2), (3, 2)]) == 0.0
    pairs = [(i, i % 2) for i in range(10)]
    hits = sum(1 for c, o in pairs if c == o)
    assert optimal_rate(pairs) == hits / len(pairs)


def test_counter_inputs_accepted():
    m = multiset_match(Counter({"a": 2}), Counter({"a": 1, "b": 1}))
    assert m.matched == 1
    assert isinstance(m, MultisetMetrics)
