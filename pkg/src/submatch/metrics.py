"""Decision metrics (ROC/PR AUC, F1, accuracy) and alignment metrics (Top-K, MRR)."""
from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata


class DegenerateLabels(ValueError):
    pass


class MissingMapping(ValueError):
    pass


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(int)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores vs {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return s, y


def roc_auc(scores, labels) -> float:
    """Mann-Whitney statistic; tied scores count one half."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Step-interpolated area under the precision-recall curve.

    Thresholds are the distinct scores in descending order; each recall
    increment is weighted by the precision reached at that threshold.
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise DegenerateLabels("PR AUC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last_of_group = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[last_of_group]
    predicted = last_of_group + 1
    precision = tp / predicted
    recall = tp / n_pos
    prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev) * precision))


def f1_accuracy(scores, labels, threshold: float = 0.5) -> tuple[float, float]:
    s, y = _check(scores, labels)
    if y.size == 0:
        return 0.0, 0.0
    pred = (s >= threshold).astype(int)
    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    return float(f1), float((pred == y).mean())


def node_ranks(ranking: Mapping[int, Sequence], mapping: Mapping[int, int]) -> list[float]:
    """1-based rank of the true target for each pattern node; ``inf`` when absent.

    ``ranking[i]`` is a sequence of target ids or of ``(target id, score)`` pairs.
    """
    if not mapping:
        raise MissingMapping("alignment metrics need a ground-truth mapping")
    ranks = []
    for i, true_j in sorted(mapping.items()):
        cands = ranking.get(i, [])
        ids = [c[0] if isinstance(c, (tuple, list)) else c for c in cands]
        try:
            ranks.append(float(ids.index(true_j) + 1))
        except ValueError:
            ranks.append(math.inf)
    return ranks


def topk_accuracy(rankings: Sequence[Mapping], mappings: Sequence[Mapping], k: int) -> float:
    """Per-sample share of pattern nodes whose true target is in the top ``k``, averaged."""
    if len(rankings) != len(mappings):
        raise ValueError("one ranking per mapping")
    if not rankings:
        return 0.0
    per_sample = [np.mean([r <= k for r in node_ranks(rk, mp)]) for rk, mp in zip(rankings, mappings)]
    return float(np.mean(per_sample))


def mrr(rankings: Sequence[Mapping], mappings: Sequence[Mapping]) -> float:
    if len(rankings) != len(mappings):
        raise ValueError("one ranking per mapping")
    if not rankings:
        return 0.0
    per_sample = [np.mean([1.0 / r for r in node_ranks(rk, mp)]) for rk, mp in zip(rankings, mappings)]
    return float(np.mean(per_sample))


def confidence_sweep(scores, labels, thresholds) -> list[dict[str, float]]:
    """F1/accuracy restricted to predictions at least ``c`` confident, per ``c``.

    Confidence of a prediction is ``max(score, 1 - score)``; the decision
    threshold stays at 0.5.
    """
    s, y = _check(scores, labels)
    conf = np.maximum(s, 1 - s)
    rows = []
    for c in thresholds:
        keep = conf >= c - 1e-12
        f1, acc = f1_accuracy(s[keep], y[keep]) if keep.any() else (float("nan"), float("nan"))
        rows.append(dict(threshold=float(c), coverage=float(keep.mean()), f1=f1, acc=acc))
    return rows
