"""Offline evaluation on the held-out uniform slice: AUC and mean BCE."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .losses import DEFAULT_CLAMP, ClampPolicy, _bce_terms
from .network import ForwardMode, Network, forward_batch
from .data import Interaction, pack

__all__ = ["MetricsResult", "UndefinedMetricError", "auc", "bce_eval", "evaluate"]


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value for the given input."""


@dataclass(frozen=True)
class MetricsResult:
    auc: float
    bce: float
    n_pos: int
    n_neg: int


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outscores a random negative.

    Pairwise definition with half credit for ties, computed via average
    ranks (Mann-Whitney) in O(n log n).  Requires both classes present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined: {n_pos} positives, {n_neg} negatives"
        )
    ranks = rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def bce_eval(
    scores: Sequence[float], labels: Sequence[int], clamp: ClampPolicy = DEFAULT_CLAMP
) -> float:
    """Mean clamped binary cross-entropy."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.size == 0:
        raise ValueError("bce_eval requires a nonempty input")
    return float(np.mean(_bce_terms(s, y, clamp)))


def evaluate(net: Network, testset: Sequence[Interaction]) -> MetricsResult:
    """Score every test interaction deterministically, then AUC + BCE.

    Dropout never participates in measurement; stochastic scoring is a
    data-collection device, not an evaluation one.
    """
    if len(testset) == 0:
        raise ValueError("empty test set")
    users, items, labels = pack(testset)
    scores = forward_batch(net, np.column_stack([users, items]), ForwardMode.DETERMINISTIC)
    n_pos = int(labels.sum())
    return MetricsResult(
        auc=auc(scores, labels.astype(np.int64)),
        bce=bce_eval(scores, labels),
        n_pos=n_pos,
        n_neg=int(labels.size) - n_pos,
    )
