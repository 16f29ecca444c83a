"""Classification metrics: accuracy and per-class intersection-over-union."""

from __future__ import annotations

import numpy as np


def compute_accuracy(pred, truth) -> float:
    """Fraction of correctly labeled items."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("cannot score an empty prediction set")
    return float(np.mean(pred == truth))


def compute_iou(pred, truth, n_classes: int) -> tuple[dict[int, float], float]:
    """Per-class |A and B| / |A or B| plus the mean over scored classes.

    Classes absent from both prediction and truth (empty union) are left
    out of the returned dict and excluded from the mean.
    """
    if n_classes <= 0:
        raise ValueError("need at least one class")
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if np.any(pred >= n_classes) or np.any(truth >= n_classes) \
            or np.any(pred < 0) or np.any(truth < 0):
        raise ValueError(f"labels outside [0, {n_classes})")
    per_class: dict[int, float] = {}
    for c in range(n_classes):
        in_pred = pred == c
        in_truth = truth == c
        union = int(np.sum(in_pred | in_truth))
        if union == 0:
            continue
        per_class[c] = float(np.sum(in_pred & in_truth) / union)
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, mean
