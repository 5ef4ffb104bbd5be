"""Run supervision: trainer subprocesses, the wire protocol, and the worker pool.

The harness owns the early-stopping decision. Trainers only stream epoch
reports and answer continue/stop, so heterogeneous trainers behave
identically on the same loss trajectory.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor

from .errors import ProtocolError
from .grid import RunSpec
from .registry import (
    STATUS_COMPLETED,
    STATUS_FAILED,
    STATUS_STOPPED_EARLY,
    EpochReport,
    RunRegistry,
    RunResult,
)
from .stopping import EarlyStopping

logger = logging.getLogger(__name__)

DEFAULT_EPOCH_TIMEOUT = 120.0


def as_command(trainer: str | list[str]) -> list[str]:
    if isinstance(trainer, str):
        return shlex.split(trainer)
    return list(trainer)


class TrainerClient:
    """One trainer subprocess speaking line-delimited JSON on stdio.

    A reader thread decouples the child's stdout from the supervision loop so
    per-message timeouts work without platform-specific polling.
    """

    def __init__(self, command: list[str], timeout: float = DEFAULT_EPOCH_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def send(self, message: dict) -> None:
        try:
            self.proc.stdin.write(json.dumps(message, sort_keys=True) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"trainer stdin closed: {exc}") from exc

    def recv(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ProtocolError(f"no trainer message within {self.timeout}s") from None
        if line is None:
            raise ProtocolError("trainer closed its output stream")
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed trainer line {line!r}: {exc}") from exc
        if not isinstance(message, dict) or "type" not in message:
            raise ProtocolError(f"trainer message without type: {line!r}")
        return message

    def close(self) -> None:
        for stream in (self.proc.stdin,):
            try:
                if stream:
                    stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


def _require_number(message: dict, field: str) -> float:
    value = message.get(field)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ProtocolError(f"field {field!r} missing or non-numeric in {message}")
    return float(value)


def supervise_run(spec: RunSpec, client: TrainerClient, manifest: str) -> RunResult:
    """Drive one run over the wire protocol and collect its result.

    Any protocol violation, crash, or timeout yields a failed result with a
    diagnostic rather than an exception; the study carries on.
    """
    reports: list[EpochReport] = []

    def failed(reason: str) -> RunResult:
        logger.warning("run %s failed: %s", spec.run_id, reason)
        return RunResult(
            run_id=spec.run_id,
            condition=spec.condition,
            fold=spec.fold,
            seed=spec.seed,
            status=STATUS_FAILED,
            epochs=tuple(reports),
            error=reason,
        )

    policy = EarlyStopping(patience=spec.patience, max_epochs=spec.max_epochs)
    try:
        client.send(
            {
                "type": "start",
                "run_id": spec.run_id,
                "model": spec.condition.model_name,
                "lr": spec.condition.lr,
                "reg": spec.condition.reg,
                "manifest": manifest,
                "dataset_size": spec.condition.dataset_size,
                "fold": spec.fold,
                "max_epochs": spec.max_epochs,
                "seed": spec.seed,
            }
        )
        while True:
            message = client.recv()
            if message["type"] == "epoch":
                epoch = int(_require_number(message, "epoch"))
                report = EpochReport(
                    epoch=epoch,
                    train_loss=_require_number(message, "train_loss"),
                    val_loss=_require_number(message, "val_loss"),
                    val_dice=_require_number(message, "val_dice"),
                )
                reports.append(report)
                go_on = policy.update(epoch, report.val_loss)
                client.send({"type": "continue"} if go_on else {"type": "stop"})
                if not go_on:
                    continue
            elif message["type"] == "final":
                break
            elif message["type"] == "error":
                return failed(f"trainer error: {message.get('message')}")
            else:
                return failed(f"unexpected message type {message['type']!r}")
    except (ProtocolError, ValueError) as exc:
        return failed(str(exc))

    if not reports:
        return failed("trainer sent final before any epoch report")

    try:
        best_epoch = int(_require_number(message, "best_epoch"))
        final = {
            "val_loss": _require_number(message, "val_loss"),
            "val_dice": _require_number(message, "val_dice"),
            "test_loss": _require_number(message, "test_loss"),
            "test_dice": _require_number(message, "test_dice"),
        }
    except ProtocolError as exc:
        return failed(str(exc))

    min_loss = min(r.val_loss for r in reports)
    by_epoch = {r.epoch: r for r in reports}
    if best_epoch not in by_epoch or by_epoch[best_epoch].val_loss > min_loss + 1e-12:
        return failed(
            f"trainer best_epoch {best_epoch} does not minimize validation loss"
        )

    status = STATUS_COMPLETED if reports[-1].epoch == spec.max_epochs else STATUS_STOPPED_EARLY
    return RunResult(
        run_id=spec.run_id,
        condition=spec.condition,
        fold=spec.fold,
        seed=spec.seed,
        status=status,
        epochs=tuple(reports),
        best_epoch=best_epoch,
        **final,
    )


def execute_run(
    spec: RunSpec,
    trainer: str | list[str],
    manifest: str,
    timeout: float = DEFAULT_EPOCH_TIMEOUT,
) -> RunResult:
    """Spawn one trainer process, supervise one run, and reap the process."""
    try:
        client = TrainerClient(as_command(trainer), timeout=timeout)
    except OSError as exc:
        return RunResult(
            run_id=spec.run_id,
            condition=spec.condition,
            fold=spec.fold,
            seed=spec.seed,
            status=STATUS_FAILED,
            error=f"could not spawn trainer: {exc}",
        )
    try:
        return supervise_run(spec, client, manifest)
    finally:
        client.close()


def run_study(
    specs: list[RunSpec],
    trainer: str | list[str],
    manifest: str,
    registry: RunRegistry,
    parallelism: int = 1,
    timeout: float = DEFAULT_EPOCH_TIMEOUT,
    progress=None,
) -> tuple[int, int]:
    """Execute pending specs with a bounded worker pool.

    Each worker owns exactly one trainer process at a time; registry appends
    are serialized by the registry itself. Returns (ok, failed) counts.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    ok = failures = 0
    done = 0
    lock = threading.Lock()

    def task(spec: RunSpec) -> RunResult:
        return execute_run(spec, trainer, manifest, timeout)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        for result in pool.map(task, specs):
            registry.append(result)
            with lock:
                done += 1
                if result.ok:
                    ok += 1
                else:
                    failures += 1
                if progress is not None:
                    progress(done, len(specs), result)
    return ok, failures
