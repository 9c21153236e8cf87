"""Clustering agreement and outlier-detection rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _pairs(x):
    return x * (x - 1) / 2.0


def adjusted_rand_index(a, b):
    """Hubert-Arabie adjusted Rand index between two partitions.

    When the maximum and expected index coincide (e.g. both partitions put
    everything in one cluster) the result is 1 for identical partitions up to
    relabeling and 0 otherwise.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("partitions must be 1-d and of equal length")
    if a.size == 0:
        raise ValueError("partitions must be nonempty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    index = _pairs(table).sum()
    rows = _pairs(table.sum(axis=1)).sum()
    cols = _pairs(table.sum(axis=0)).sum()
    total = _pairs(float(a.size))
    expected = rows * cols / total if total > 0 else 0.0
    max_index = 0.5 * (rows + cols)
    if max_index == expected:
        same = np.count_nonzero(table) == table.shape[0] == table.shape[1]
        return 1.0 if same else 0.0
    return float((index - expected) / (max_index - expected))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn


def outlier_rates(predicted, truth):
    """``(TPR, FPR, counts)``; a rate with an empty denominator is ``None``."""
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if predicted.shape != truth.shape:
        raise ValueError("predicted and truth differ in length")
    counts = ConfusionCounts(
        tp=int(np.sum(predicted & truth)), fp=int(np.sum(predicted & ~truth)),
        tn=int(np.sum(~predicted & ~truth)), fn=int(np.sum(~predicted & truth)))
    pos = counts.tp + counts.fn
    neg = counts.fp + counts.tn
    tpr = counts.tp / pos if pos else None
    fpr = counts.fp / neg if neg else None
    return tpr, fpr, counts


def mean_sd(values):
    """Mean and sample standard deviation, skipping ``None``/NaN entries.

    Returns ``(None, None)`` when nothing remains; sd is ``None`` for a single
    value.
    """
    vals = np.array([v for v in values if v is not None and not np.isnan(v)],
                    dtype=float)
    if vals.size == 0:
        return None, None
    sd = float(vals.std(ddof=1)) if vals.size > 1 else None
    return float(vals.mean()), sd
