"""Reader/writer for the harness's raw image payload format.

Payloads are row-major little-endian float32 with a JSON sidecar
(``<path>.json``) holding height and width. Masks share the format under
the ``<stem>.mask.raw`` convention.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

RAW_DTYPE = "<f4"


def write_raw(path: str | Path, values: np.ndarray) -> None:
    path = Path(path)
    values = np.ascontiguousarray(np.asarray(values, dtype=RAW_DTYPE))
    if values.ndim != 2:
        raise ValueError(f"raw payloads are 2-D, got {values.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(values.tobytes())
    header = {"height": int(values.shape[0]), "width": int(values.shape[1]), "dtype": RAW_DTYPE}
    Path(str(path) + ".json").write_text(json.dumps(header, sort_keys=True) + "\n")


def read_raw(path: str | Path) -> np.ndarray:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype=header.get("dtype", RAW_DTYPE))
    return data.reshape(header["height"], header["width"]).astype(np.float32)


def mask_path_for(image_path: str | Path) -> Path:
    path = Path(image_path)
    if path.suffix == ".raw":
        return path.with_suffix(".mask.raw")
    return Path(str(path) + ".mask.raw")
