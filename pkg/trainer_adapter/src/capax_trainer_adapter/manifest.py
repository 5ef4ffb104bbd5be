"""Reader for the harness's dataset manifest format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class RunSplit:
    """Image paths for one (dataset size, fold) slice of a manifest."""

    train: list[str]
    val: list[str]
    test: list[str]


def load_manifest(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("format") != "capax-manifest":
        raise ValueError(f"{path} is not a capax manifest")
    return data


def resolve_split(manifest: dict, dataset_size: int, fold: int, base_dir: str | Path) -> RunSplit:
    """Materialize train/val/test image paths for one run.

    Training images are the size's development pool minus the validation
    fold; URIs are resolved relative to the manifest's directory.
    """
    membership = manifest["membership"].get(str(dataset_size))
    if membership is None:
        raise KeyError(f"manifest has no dataset of size {dataset_size}")
    folds = membership.get("folds") or []
    if not 0 <= fold < len(folds):
        raise KeyError(f"manifest has no fold {fold} for size {dataset_size}")
    images = manifest["images"]
    base = Path(base_dir)

    def paths(indices) -> list[str]:
        return [str(base / images[i]["uri"]) for i in indices]

    val_set = set(folds[fold])
    train = [i for i in membership["dev"] if i not in val_set]
    return RunSplit(train=paths(train), val=paths(sorted(val_set)), test=paths(membership["test"]))
