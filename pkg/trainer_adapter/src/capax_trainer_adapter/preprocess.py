"""Adapter-side image normalization.

Independent implementation of the study's preprocessing contract: min-max
rescale to [0, 1], resize so the larger dimension hits the target (area
kernel shrinking, bicubic enlarging), zero-pad symmetrically with the odd
pixel on the bottom/right.
"""

from __future__ import annotations

import math

import cv2
import numpy as np


def preprocess(raw: np.ndarray, target: int = 256) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float32)
    if raw.ndim != 2 or 0 in raw.shape:
        raise ValueError(f"cannot preprocess image of shape {raw.shape}")
    lo, hi = float(raw.min()), float(raw.max())
    values = np.zeros_like(raw) if hi == lo else (raw - lo) / (hi - lo)

    h, w = values.shape
    scale = target / max(h, w)
    if h >= w:
        new_h, new_w = target, max(1, math.floor(w * scale + 0.5))
    else:
        new_h, new_w = max(1, math.floor(h * scale + 0.5)), target
    if (new_h, new_w) != (h, w):
        kernel = cv2.INTER_AREA if scale < 1.0 else cv2.INTER_CUBIC
        values = np.clip(cv2.resize(values, (new_w, new_h), interpolation=kernel), 0.0, 1.0)

    pad_h = target - new_h
    pad_w = target - new_w
    return np.pad(values, ((pad_h // 2, pad_h - pad_h // 2),
                           (pad_w // 2, pad_w - pad_w // 2))).astype(np.float32)
