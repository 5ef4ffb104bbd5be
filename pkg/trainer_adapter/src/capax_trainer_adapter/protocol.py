"""Wire-protocol server: one training run per process over stdio."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .manifest import load_manifest, resolve_split
from .metrics import dice_index
from .models import MODEL_NAMES
from .rawio import write_raw
from .training import ArraySet, TrainingRun

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdapterConfig:
    device: str = "cpu"
    batch_size: int = 8
    dump_predictions: str | None = None


def _emit(obj: dict, out) -> None:
    out.write(json.dumps(obj, sort_keys=True) + "\n")
    out.flush()


def _fail(out, message: str) -> int:
    logger.error("%s", message)
    _emit({"type": "error", "message": message}, out)
    return 2


def serve(stdin, stdout, config: AdapterConfig = AdapterConfig()) -> int:
    line = stdin.readline()
    if not line:
        return _fail(stdout, "no start message")
    try:
        start = json.loads(line)
    except json.JSONDecodeError as exc:
        return _fail(stdout, f"unparseable start message: {exc}")
    if start.get("type") != "start":
        return _fail(stdout, f"expected start message, got {start.get('type')!r}")

    try:
        model_name = str(start["model"])
        if model_name not in MODEL_NAMES:
            raise ValueError(f"unknown model {model_name!r}")
        manifest_path = Path(start["manifest"])
        dataset_size = int(start["dataset_size"])
        fold = int(start["fold"])
        lr = float(start["lr"])
        reg = float(start["reg"])
        max_epochs = int(start.get("max_epochs", 50))
        seed = int(start["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        return _fail(stdout, f"invalid start message: {exc}")

    try:
        manifest = load_manifest(manifest_path)
        split = resolve_split(manifest, dataset_size, fold, manifest_path.parent)
        run = TrainingRun(
            model_name=model_name,
            train=ArraySet(split.train),
            val=ArraySet(split.val),
            test=ArraySet(split.test),
            lr=lr,
            reg=reg,
            seed=seed,
            device=config.device,
            batch_size=config.batch_size,
        )
    except (OSError, KeyError, ValueError, FileNotFoundError) as exc:
        return _fail(stdout, f"cannot set up run: {exc}")

    for _ in range(max_epochs):
        metrics = run.train_one_epoch()
        _emit(
            {
                "type": "epoch",
                "epoch": metrics.epoch,
                "train_loss": metrics.train_loss,
                "val_loss": metrics.val_loss,
                "val_dice": metrics.val_dice,
            },
            stdout,
        )
        reply_line = stdin.readline()
        if not reply_line:
            return 1
        try:
            reply = json.loads(reply_line)
        except json.JSONDecodeError as exc:
            return _fail(stdout, f"unparseable reply: {exc}")
        if reply.get("type") == "stop":
            break
        if reply.get("type") != "continue":
            return _fail(stdout, f"unexpected reply type {reply.get('type')!r}")

    final = run.finalize()
    if config.dump_predictions:
        dump_dir = Path(config.dump_predictions)
        reported = []
        for i, (y, p) in enumerate(run.predictions(run.test_set)):
            write_raw(dump_dir / f"test_{i:04d}.truth.raw", y)
            write_raw(dump_dir / f"test_{i:04d}.prob.raw", p)
            reported.append(dice_index(y, p))
        (dump_dir / "reported.json").write_text(
            json.dumps({"test_dice": final.test_dice, "per_image": reported}) + "\n")

    _emit(
        {
            "type": "final",
            "best_epoch": final.best_epoch,
            "val_loss": final.val_loss,
            "val_dice": final.val_dice,
            "test_loss": final.test_loss,
            "test_dice": final.test_dice,
        },
        stdout,
    )
    return 0
