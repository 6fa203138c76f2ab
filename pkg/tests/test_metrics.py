import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import average_precision_score, roc_auc_score

from submatch.metrics import (
    DegenerateLabels, MissingMapping, confidence_sweep, f1_accuracy, mrr, node_ranks, pr_auc,
    roc_auc, topk_accuracy,
)


def test_perfect_separation():
    s, y = [0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]
    assert roc_auc(s, y) == 1.0
    assert pr_auc(s, y) == 1.0
    assert f1_accuracy(s, y) == (1.0, 1.0)


def test_all_equal_scores():
    assert roc_auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


def test_inverted():
    assert roc_auc([0.2, 0.3, 0.8, 0.9], [1, 1, 0, 0]) == 0.0


def test_single_class_rejected():
    with pytest.raises(DegenerateLabels):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(DegenerateLabels):
        pr_auc([0.1, 0.2], [0, 0])


def test_threshold_is_inclusive():
    assert f1_accuracy([0.5, 0.49], [1, 0]) == (1.0, 1.0)


def _ranking(rank_of_truth):
    # one pattern node per entry, true target id 0 placed at the given rank
    return {i: [99 + k for k in range(r - 1)] + [0] for i, r in enumerate(rank_of_truth)}


def test_mrr_example():
    mapping = {0: 0, 1: 0, 2: 0}
    assert mrr([_ranking([1, 2, 4])], [mapping]) == pytest.approx((1 + 0.5 + 0.25) / 3)


def test_top1_example():
    mapping = {0: 0, 1: 0, 2: 0}
    assert topk_accuracy([_ranking([1, 1, 3])], [mapping], 1) == pytest.approx(2 / 3)


def test_absent_target_is_infinite_rank():
    ranking = {0: [(4, 0.9), (2, 0.1)], 1: []}
    assert node_ranks(ranking, {0: 2, 1: 3}) == [2.0, math.inf]
    assert mrr([ranking], [{0: 2, 1: 3}]) == pytest.approx(0.25)
    assert topk_accuracy([ranking], [{0: 2, 1: 3}], 100) == 0.5


def test_missing_mapping():
    with pytest.raises(MissingMapping):
        mrr([{0: [1]}], [{}])


def test_samples_averaged_before_nodes():
    a = (_ranking([1]), {0: 0})
    b = (_ranking([2, 2, 2, 2]), {i: 0 for i in range(4)})
    assert topk_accuracy([a[0], b[0]], [a[1], b[1]], 1) == pytest.approx(0.5)


def test_confidence_sweep_rows():
    s = np.array([0.95, 0.9, 0.6, 0.4, 0.05, 0.7])
    y = np.array([1, 1, 0, 0, 0, 1])
    rows = confidence_sweep(s, y, [0.5, 0.9])
    assert rows[0]["coverage"] == 1.0
    assert rows[1]["coverage"] == pytest.approx(0.5)
    assert rows[1]["f1"] == 1.0 and rows[1]["acc"] == 1.0


scores_labels = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]) | st.floats(0, 1, allow_subnormal=False), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


@settings(max_examples=100, deadline=None)
@given(scores_labels)
def test_matches_reference_implementation(data):
    s, y = data
    assert roc_auc(s, y) == pytest.approx(roc_auc_score(y, s), abs=1e-12)
    assert pr_auc(s, y) == pytest.approx(average_precision_score(y, s), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(scores_labels)
def test_roc_invariant_under_monotone_transform(data):
    s, y = data
    t = 8.0 * np.asarray(s)  # power-of-two scaling is exact, so order is kept
    assert roc_auc(t, y) == pytest.approx(roc_auc(s, y), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(1, 6), min_size=1, max_size=5), min_size=1, max_size=5))
def test_topk_monotone_and_mrr_range(rank_lists):
    rankings = [_ranking(r) for r in rank_lists]
    mappings = [{i: 0 for i in range(len(r))} for r in rank_lists]
    values = [topk_accuracy(rankings, mappings, k) for k in range(1, 8)]
    assert values == sorted(values) and values[-1] == 1.0
    m = mrr(rankings, mappings)
    assert 0 <= m <= 1
    assert (m == 1.0) == all(r == 1 for rs in rank_lists for r in rs)
