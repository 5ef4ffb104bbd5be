"""Segmentation metrics: binary cross-entropy, DICE overlap, and run aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

BCE_EPS = 1e-7


@dataclass(frozen=True)
class PixelBatch:
    """Flat per-pixel labels and predicted foreground probabilities."""

    y: np.ndarray
    y_hat: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y)
        y_hat = np.asarray(self.y_hat, dtype=float)
        if y.shape != y_hat.shape or y.size == 0:
            raise ValueError(f"label/prediction shape mismatch: {y.shape} vs {y_hat.shape}")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be binary")
        if y_hat.min() < 0.0 or y_hat.max() > 1.0:
            raise ValueError("predictions must lie in [0, 1]")
        object.__setattr__(self, "y", y.astype(np.int8).ravel())
        object.__setattr__(self, "y_hat", y_hat.ravel())

    @property
    def n(self) -> int:
        return self.y.size


def _as_batch(y, y_hat) -> PixelBatch:
    if isinstance(y, PixelBatch):
        return y
    return PixelBatch(np.asarray(y), np.asarray(y_hat))


def bce(y, y_hat=None, eps: float = BCE_EPS) -> float:
    """Mean binary cross-entropy with predictions clamped to [eps, 1 - eps]."""
    batch = _as_batch(y, y_hat)
    p = np.clip(batch.y_hat, eps, 1.0 - eps)
    labels = batch.y
    return float(-np.mean(labels * np.log(p) + (1 - labels) * np.log(1.0 - p)))


def confusion_counts(y, y_hat=None, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) after rounding predictions; ties at 0.5 round up."""
    batch = _as_batch(y, y_hat)
    pred = batch.y_hat >= threshold
    truth = batch.y.astype(bool)
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = batch.n - tp - fp - fn
    return tp, fp, fn, tn


def dice(y, y_hat=None, empty_value: float = 1.0) -> float:
    """Overlap index 2TP / (2TP + FP + FN) on rounded predictions.

    When both the labels and the rounded predictions are empty the ratio is
    0/0; ``empty_value`` (1.0 by default, 0.0 for the strict convention)
    is returned instead.
    """
    tp, fp, fn, _ = confusion_counts(y, y_hat)
    denom = 2 * tp + fp + fn
    if denom == 0:
        return float(empty_value)
    return 2.0 * tp / denom


def dice_per_image_mean(
    pairs: Iterable[tuple[np.ndarray, np.ndarray]], empty_value: float = 1.0
) -> float:
    """Average of per-image DICE values, the run-level reduction."""
    values = [dice(y, y_hat, empty_value=empty_value) for y, y_hat in pairs]
    if not values:
        raise ValueError("no images to reduce")
    return float(np.mean(values))


def dice_pooled(pairs: Iterable[tuple[np.ndarray, np.ndarray]], empty_value: float = 1.0) -> float:
    """DICE over all pixels pooled into one batch, the alternative reduction."""
    ys, yhats = [], []
    for y, y_hat in pairs:
        ys.append(np.asarray(y).ravel())
        yhats.append(np.asarray(y_hat).ravel())
    if not ys:
        raise ValueError("no images to reduce")
    return dice(np.concatenate(ys), np.concatenate(yhats), empty_value=empty_value)


@dataclass(frozen=True)
class MetricSummary:
    """Location and spread of one metric over a group of runs."""

    mean: float
    median: float
    iqr_low: float
    iqr_high: float
    n_runs: int

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "iqr_low": self.iqr_low,
            "iqr_high": self.iqr_high,
            "n_runs": self.n_runs,
        }


def summarize(values: Sequence[float]) -> MetricSummary:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty group")
    q25, q50, q75 = np.percentile(arr, [25.0, 50.0, 75.0])
    return MetricSummary(
        mean=float(arr.mean()),
        median=float(q50),
        iqr_low=float(q25),
        iqr_high=float(q75),
        n_runs=int(arr.size),
    )


def aggregate(results: Sequence, key: Callable, metric: Callable) -> dict:
    """Group run results and summarize one metric per group.

    ``key`` maps a result to its group label; ``metric`` extracts the value.
    Results whose metric is None (failed runs) are skipped, and groups left
    empty are omitted from the output.
    """
    if not results:
        raise ValueError("no results to aggregate")
    groups: dict = {}
    for result in results:
        value = metric(result)
        if value is None:
            continue
        groups.setdefault(key(result), []).append(value)
    return {label: summarize(vals) for label, vals in groups.items()}
