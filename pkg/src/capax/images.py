"""Image preprocessing and the raw float32 payload format.

Payloads are stored as row-major little-endian float32 with a JSON sidecar
(``<uri>.json``) carrying height and width, so trainers in any language can
read them without an imaging stack.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import cv2
import numpy as np

from .errors import DegenerateImage

TARGET_SIZE = 256
RAW_DTYPE = "<f4"


def rescale_intensities(values: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant image maps to all zeros."""
    values = np.asarray(values, dtype=np.float32)
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def preprocess_image(raw: np.ndarray, target: int = TARGET_SIZE) -> np.ndarray:
    """Normalize one image to a target x target float32 tensor in [0, 1].

    The image is min-max rescaled, resized so its larger dimension equals the
    target (area averaging when shrinking, bicubic when enlarging), then zero
    padded symmetrically; an odd remainder puts the extra pixel on the bottom
    or right edge.
    """
    raw = np.asarray(raw, dtype=np.float32)
    if raw.ndim != 2 or raw.shape[0] <= 0 or raw.shape[1] <= 0:
        raise DegenerateImage(f"cannot preprocess image of shape {raw.shape}")

    values = rescale_intensities(raw)
    h, w = values.shape
    scale = target / max(h, w)
    if h >= w:
        new_h, new_w = target, max(1, math.floor(w * scale + 0.5))
    else:
        new_h, new_w = max(1, math.floor(h * scale + 0.5)), target

    if (new_h, new_w) != (h, w):
        interp = cv2.INTER_AREA if scale < 1.0 else cv2.INTER_CUBIC
        values = cv2.resize(values, (new_w, new_h), interpolation=interp)
        # Bicubic overshoots; the contract is a [0, 1] tensor.
        values = np.clip(values, 0.0, 1.0)

    pad_top = (target - new_h) // 2
    pad_bottom = target - new_h - pad_top
    pad_left = (target - new_w) // 2
    pad_right = target - new_w - pad_left
    out = np.pad(values, ((pad_top, pad_bottom), (pad_left, pad_right)))
    return out.astype(np.float32)


def write_raw_image(path: str | Path, values: np.ndarray) -> None:
    """Write a 2-D array in the raw payload format with its sidecar header."""
    path = Path(path)
    values = np.ascontiguousarray(np.asarray(values, dtype=RAW_DTYPE))
    if values.ndim != 2:
        raise ValueError(f"raw payloads are 2-D, got shape {values.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(values.tobytes())
    sidecar = {"height": int(values.shape[0]), "width": int(values.shape[1]), "dtype": RAW_DTYPE}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def read_raw_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype=sidecar.get("dtype", RAW_DTYPE))
    return data.reshape(sidecar["height"], sidecar["width"]).copy()
