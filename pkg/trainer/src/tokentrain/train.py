"""Deterministic softmax-regression training over token exports.

Two modes share one linear model:

- whole-model classification: features are mean-pooled face tokens, one
  example per (model, scheduled mask ratio);
- per-face segmentation: a single linear head over the face token rows
  themselves (a deliberately simple placeholder head).

Training is full-batch gradient descent from a zero initialization, so a
fixed seed (which only drives the split) reproduces results bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledTokenSet, _ratio_key, stratified_split
from .metrics import compute_accuracy, compute_iou


@dataclass(frozen=True)
class TrainResult:
    weights: np.ndarray          # (C, D + 1), bias in the last column
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    metrics: dict
    history: tuple               # per-epoch training loss


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _fit_softmax(X: np.ndarray, y: np.ndarray, n_classes: int, epochs: int,
                 lr: float, l2: float = 1e-4):
    """Full-batch gradient descent on multinomial cross entropy."""
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    W = np.zeros((n_classes, d + 1))
    onehot = np.eye(n_classes)[y]
    history = []
    for _ in range(epochs):
        probs = _softmax_rows(Xb @ W.T)
        loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-12))
                     + 0.5 * l2 * np.sum(W[:, :-1] ** 2))
        grad = (probs - onehot).T @ Xb / n
        grad[:, :-1] += l2 * W[:, :-1]
        W -= lr * grad
        history.append(loss)
    return W, tuple(history)


def _predict(W, mean, scale, X) -> np.ndarray:
    Xs = (X - mean) / scale
    Xb = np.hstack([Xs, np.ones((len(Xs), 1))])
    return np.argmax(Xb @ W.T, axis=1)


def train(dataset: LabeledTokenSet, epochs: int = 300,
          mask_schedule=(0.0,), seed: int = 0, lr: float = 0.5,
          mode: str = "model") -> TrainResult:
    """Train on a 70/15/15 stratified split and score the held-out test set.

    Whole-model mode consumes one export per scheduled mask ratio per
    training model (validation and test always use the first scheduled
    ratio, conventionally the unmasked export). Per-face mode trains the
    linear head on token rows labeled by ``face_labels``.
    """
    if mode not in ("model", "face"):
        raise ValueError(f"unknown training mode {mode!r}")
    if not mask_schedule:
        raise ValueError("mask schedule must name at least one ratio")
    schedule = [_ratio_key(r) for r in mask_schedule]
    labels = [item.label for item in dataset.items]
    train_idx, val_idx, test_idx = stratified_split(labels, seed)

    def gather(indices, ratios):
        feats, ys = [], []
        for k in indices:
            item = dataset.items[k]
            for ratio in ratios:
                if mode == "model":
                    feats.append(dataset.model_features(item, ratio))
                    ys.append(item.label)
                else:
                    tokens = dataset.load_tokens(item, ratio)
                    if item.face_labels is None:
                        raise ValueError(f"{item.model}: per-face mode needs "
                                         "face_labels")
                    if len(item.face_labels) != len(tokens):
                        raise ValueError(
                            f"{item.model}: {len(item.face_labels)} face "
                            f"labels vs {len(tokens)} token rows")
                    feats.extend(tokens)
                    ys.extend(item.face_labels)
        return np.asarray(feats, dtype=np.float64), np.asarray(ys)

    X_train, y_train = gather(train_idx, schedule)
    consumed_training = len(dataset.consumed)
    mean = X_train.mean(axis=0)
    scale = X_train.std(axis=0)
    scale[scale < 1e-12] = 1.0
    W, history = _fit_softmax((X_train - mean) / scale, y_train,
                              dataset.n_classes, epochs, lr)

    metrics = {"train": {}, "validation": {}, "test": {},
               "split_sizes": {"train": len(train_idx), "validation": len(val_idx),
                               "test": len(test_idx)},
               "consumed_exports": consumed_training}
    for name, indices in (("train", train_idx), ("validation", val_idx),
                          ("test", test_idx)):
        ratios = schedule if name == "train" else schedule[:1]
        if not indices:
            continue
        X, y = gather(indices, ratios)
        pred = _predict(W, mean, scale, X)
        per_class, mean_iou = compute_iou(pred, y, dataset.n_classes)
        metrics[name] = {
            "accuracy": compute_accuracy(pred, y),
            "iou_per_class": {str(c): v for c, v in per_class.items()},
            "mean_iou": mean_iou,
            "examples": int(len(y)),
        }
    return TrainResult(W, mean, scale, metrics, history)
