"""Overlap metrics for segmentations and registrations."""

from __future__ import annotations

import numpy as np

from .errors import DimsMismatch
from .images import LabelMap


def dice(a: LabelMap, b: LabelMap, num_labels: int) -> tuple[np.ndarray, float]:
    """Per-label Dice coefficients and their mean.

    Empty-empty labels score 1 by convention.
    """
    if a.dims != b.dims:
        raise DimsMismatch("label maps have different dims")
    scores = np.empty(num_labels)
    for k in range(num_labels):
        in_a = a.labels == k
        in_b = b.labels == k
        denom = in_a.sum() + in_b.sum()
        scores[k] = 1.0 if denom == 0 else 2.0 * np.sum(in_a & in_b) / denom
    return scores, float(scores.mean())


def mean_overlap(a: LabelMap, b: LabelMap, num_labels: int) -> float:
    """Pooled overlap over foreground labels; label 0 is background.

    MO = 2 * sum_k |A_k & B_k| / sum_k (|A_k| + |B_k|) over k >= 1.
    """
    if a.dims != b.dims:
        raise DimsMismatch("label maps have different dims")
    inter = 0
    total = 0
    for k in range(1, num_labels):
        in_a = a.labels == k
        in_b = b.labels == k
        inter += int(np.sum(in_a & in_b))
        total += int(in_a.sum() + in_b.sum())
    return 1.0 if total == 0 else 2.0 * inter / total
