"""Adapter-side evaluation metrics, computed in float64 numpy."""

from __future__ import annotations

import numpy as np

BCE_EPS = 1e-7


def bce_loss(y: np.ndarray, y_hat: np.ndarray, eps: float = BCE_EPS) -> float:
    y = np.asarray(y, dtype=np.float64).ravel()
    p = np.clip(np.asarray(y_hat, dtype=np.float64).ravel(), eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def dice_index(y: np.ndarray, y_hat: np.ndarray, empty_value: float = 1.0) -> float:
    """2TP / (2TP + FP + FN) with predictions rounded at 0.5 (ties up)."""
    truth = np.asarray(y, dtype=np.float64).ravel() >= 0.5
    pred = np.asarray(y_hat, dtype=np.float64).ravel() >= 0.5
    tp = float(np.count_nonzero(truth & pred))
    fp = float(np.count_nonzero(~truth & pred))
    fn = float(np.count_nonzero(truth & ~pred))
    denom = 2.0 * tp + fp + fn
    if denom == 0.0:
        return float(empty_value)
    return 2.0 * tp / denom


def mean_image_dice(pairs) -> float:
    values = [dice_index(y, y_hat) for y, y_hat in pairs]
    if not values:
        raise ValueError("no images")
    return float(np.mean(values))
