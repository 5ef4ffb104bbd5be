import sys
from pathlib import Path

import numpy as np
import pytest

# transcript harness shared with the study package's test suite
PRIMARY_TESTS = Path(__file__).resolve().parents[2] / "tests"
sys.path.insert(0, str(PRIMARY_TESTS))

from capax.inventory import demo_inventory  # noqa: E402
from capax.plan import build_plan, save_manifest  # noqa: E402

from capax_trainer_adapter.rawio import mask_path_for, write_raw  # noqa: E402

IMAGE_SIZE = 32


def synthetic_sample(rng, size=IMAGE_SIZE):
    """A blob mask plus an image correlated with it; easy to learn."""
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = rng.integers(10, size - 10, 2)
    radius = rng.integers(4, 9)
    mask = ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2).astype(np.float32)
    image = 0.7 * mask + 0.15 + 0.1 * rng.random((size, size)).astype(np.float32)
    return image.astype(np.float32), mask


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    """A tiny but complete study dataset: manifest + raw images + masks.

    5 patients x 6 selected images, nested sizes (15, 30), 5 folds.
    """
    root = tmp_path_factory.mktemp("dataset")
    patients = demo_inventory(5, seed=1234)
    plan = build_plan(patients, sizes=(15, 30), seed=1234, images_per_patient=6)
    manifest_path = root / "plan.json"
    save_manifest(plan, manifest_path)

    rng = np.random.default_rng(4321)
    for refs in plan.selected.values():
        for ref in refs:
            image, mask = synthetic_sample(rng)
            write_raw(root / ref.source_uri, image)
            write_raw(mask_path_for(root / ref.source_uri), mask)
    return manifest_path


def start_message(manifest_path, model="R18", dataset_size=15, fold=0,
                  max_epochs=3, seed=7, lr=1e-3, reg=1e-4, run_id="fixture-run"):
    return {
        "type": "start",
        "run_id": run_id,
        "model": model,
        "lr": lr,
        "reg": reg,
        "manifest": str(manifest_path),
        "dataset_size": dataset_size,
        "fold": fold,
        "max_epochs": max_epochs,
        "seed": seed,
    }
