"""Protocol-conforming synthetic trainer.

Serves exactly one run per process over line-delimited JSON on stdin/stdout:
read a start message, stream epoch reports, honor continue/stop replies, then
emit the final message with metrics at the best validation epoch.
"""

from __future__ import annotations

import argparse
import json
import sys

from .grid import MODEL_TO_FACTORS, ExperimentCondition
from .surface import CLAMP_MODES, REFERENCE_SIGMA, ResponseSurface, simulate_outcome


def _emit(obj: dict, out) -> None:
    out.write(json.dumps(obj, sort_keys=True) + "\n")
    out.flush()


def _fail(out, message: str) -> int:
    _emit({"type": "error", "message": message}, out)
    return 2


def serve(stdin, stdout, surface: ResponseSurface) -> int:
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
        family, ls = MODEL_TO_FACTORS[start["model"]]
        condition = ExperimentCondition(
            family=family,
            ls=ls,
            dataset_size=int(start["dataset_size"]),
            lr=float(start["lr"]),
            reg=float(start["reg"]),
        )
        run_id = str(start["run_id"])
        max_epochs = int(start.get("max_epochs", 50))
        int(start["fold"])
        int(start["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        return _fail(stdout, f"invalid start message field: {exc!r}")

    sim = simulate_outcome(condition, run_id, surface, max_epochs)

    epochs_run = 0
    for epoch in range(1, max_epochs + 1):
        _emit(
            {
                "type": "epoch",
                "epoch": epoch,
                "train_loss": sim.train_loss[epoch - 1],
                "val_loss": sim.val_loss[epoch - 1],
                "val_dice": sim.val_dice[epoch - 1],
            },
            stdout,
        )
        epochs_run = epoch
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

    losses = sim.val_loss[:epochs_run]
    best_epoch = min(range(1, epochs_run + 1), key=lambda e: (losses[e - 1], e))
    _emit(
        {
            "type": "final",
            "best_epoch": best_epoch,
            "val_loss": sim.val_loss[best_epoch - 1],
            "val_dice": sim.val_dice[best_epoch - 1],
            "test_loss": sim.test_loss,
            "test_dice": sim.test_dice,
        },
        stdout,
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Synthetic response-surface trainer")
    parser.add_argument("--sigma", type=float, default=REFERENCE_SIGMA,
                        help="residual standard deviation of simulated outcomes")
    parser.add_argument("--mode", choices=CLAMP_MODES, default="raw",
                        help="whether simulated metrics are clamped to [0, 1]")
    args = parser.parse_args(argv)
    surface = ResponseSurface(sigma=args.sigma, clamp_mode=args.mode)
    return serve(sys.stdin, sys.stdout, surface)


if __name__ == "__main__":
    sys.exit(main())
