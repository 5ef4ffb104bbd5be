"""Certify the adapter with the same scripted transcript suite as the
bundled synthetic trainer: identical reply scripts, identical message-shape
checks. A real trainer reports its own numbers, so values are shape-checked
rather than byte-compared, and start messages point at the test dataset."""

import json
import sys

import numpy as np
import pytest

from capax.grid import ExperimentCondition, RunSpec
from capax.metrics import dice as study_dice
from capax.supervisor import execute_run

from capax_trainer_adapter.rawio import read_raw

from conftest import start_message
from transcript_harness import check_message_shape, load_transcripts, replay

ADAPTER = [sys.executable, "-m", "capax_trainer_adapter.cli"]

FIXTURE_MODELS = {"golden-a": "B0", "golden-b": "R18", "golden-c": "V16"}


@pytest.mark.parametrize("transcript", load_transcripts(),
                         ids=lambda t: t["start"]["run_id"])
def test_golden_transcript_shape(transcript, fixture_dataset):
    run_id = transcript["start"]["run_id"]
    scripted = dict(transcript)
    scripted["start"] = start_message(
        fixture_dataset,
        model=FIXTURE_MODELS[run_id],
        dataset_size=15,
        fold=transcript["start"]["fold"] % 5,
        max_epochs=transcript["start"]["max_epochs"],
        seed=transcript["start"]["seed"],
        lr=transcript["start"]["lr"],
        reg=transcript["start"]["reg"],
        run_id=run_id,
    )
    lines = replay(ADAPTER, scripted, timeout=600)
    check_message_shape(lines, scripted)


def test_stop_after_three_epochs(fixture_dataset):
    transcript = {
        "start": start_message(fixture_dataset, model="R18", max_epochs=50),
        "replies": ["continue", "continue", "stop"],
    }
    lines = replay(ADAPTER, transcript, timeout=600)
    assert len(lines) == 4  # exactly 3 epoch messages then final
    types = [json.loads(line)["type"] for line in lines]
    assert types == ["epoch", "epoch", "epoch", "final"]


def test_error_paths(fixture_dataset):
    import subprocess

    def start_and_read(start):
        proc = subprocess.Popen(ADAPTER, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                text=True, bufsize=1)
        proc.stdin.write(json.dumps(start) + "\n")
        proc.stdin.flush()
        message = json.loads(proc.stdout.readline())
        proc.stdin.close()
        code = proc.wait(timeout=60)
        return message, code

    message, code = start_and_read(start_message(fixture_dataset, model="Z9"))
    assert message["type"] == "error" and code == 2

    message, code = start_and_read(start_message("/nonexistent/plan.json"))
    assert message["type"] == "error" and code == 2

    message, code = start_and_read(start_message(fixture_dataset, dataset_size=9999))
    assert message["type"] == "error" and code == 2


def test_supervised_by_study_harness(fixture_dataset):
    condition = ExperimentCondition("ResNet", "short", 15, 1e-3, 1e-4)
    spec = RunSpec.create(condition, fold=1, seed=3, max_epochs=2)
    result = execute_run(spec, ADAPTER, str(fixture_dataset), timeout=600)
    assert result.ok, result.error
    assert len(result.epochs) == 2
    assert result.test_dice is not None and 0.0 <= result.test_dice <= 1.0


def test_reported_dice_matches_study_metrics(fixture_dataset, tmp_path):
    dump_dir = tmp_path / "dumps"
    transcript = {
        "start": start_message(fixture_dataset, model="R18", max_epochs=2, seed=11,
                               run_id="parity-run"),
        "replies": ["continue", "stop"],
    }
    command = ADAPTER + ["--dump-predictions", str(dump_dir)]
    lines = replay(command, transcript, timeout=600)
    final = json.loads(lines[-1])

    truth_paths = sorted(dump_dir.glob("test_*.truth.raw"))
    assert truth_paths
    dice_values = []
    for truth_path in truth_paths:
        prob_path = str(truth_path).replace(".truth.raw", ".prob.raw")
        y = read_raw(truth_path)
        p = read_raw(prob_path)
        dice_values.append(study_dice(y.astype(int), p.astype(np.float64)))
    assert abs(final["test_dice"] - float(np.mean(dice_values))) <= 1e-6
