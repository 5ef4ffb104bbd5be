"""Append-only run registry with resumable scheduling."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import RegistryCorrupt
from .grid import ExperimentCondition, RunSpec

STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"
STATUS_STOPPED_EARLY = "stopped_early"
_TERMINAL_OK = (STATUS_COMPLETED, STATUS_STOPPED_EARLY)


@dataclass(frozen=True, slots=True)
class EpochReport:
    """Per-epoch metrics streamed by a trainer; epoch counts from 1."""

    epoch: int
    train_loss: float
    val_loss: float
    val_dice: float

    def as_list(self) -> list:
        return [self.epoch, self.train_loss, self.val_loss, self.val_dice]


@dataclass(frozen=True)
class RunResult:
    """Outcome of one run: epoch trajectory plus metrics at the best epoch."""

    run_id: str
    condition: ExperimentCondition
    fold: int
    seed: int
    status: str
    epochs: tuple[EpochReport, ...] = ()
    best_epoch: int | None = None
    val_loss: float | None = None
    val_dice: float | None = None
    test_loss: float | None = None
    test_dice: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.status in _TERMINAL_OK

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "condition": self.condition.as_dict(),
            "fold": self.fold,
            "seed": self.seed,
            "status": self.status,
            "epochs": [e.as_list() for e in self.epochs],
            "best_epoch": self.best_epoch,
            "val_loss": self.val_loss,
            "val_dice": self.val_dice,
            "test_loss": self.test_loss,
            "test_dice": self.test_dice,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(
            run_id=data["run_id"],
            condition=ExperimentCondition.from_dict(data["condition"]),
            fold=int(data["fold"]),
            seed=int(data["seed"]),
            status=data["status"],
            epochs=tuple(EpochReport(int(e[0]), e[1], e[2], e[3]) for e in data["epochs"]),
            best_epoch=data.get("best_epoch"),
            val_loss=data.get("val_loss"),
            val_dice=data.get("val_dice"),
            test_loss=data.get("test_loss"),
            test_dice=data.get("test_dice"),
            error=data.get("error"),
        )


class RunRegistry:
    """Newline-delimited JSON log of run results.

    Appends are serialized through a single lock so concurrent workers can
    share one registry. Replaying the log reconstructs the same state: the
    latest record per run_id wins, which is how failed runs get superseded
    by their re-executions.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, RunResult] = {}
        self._order: list[str] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open() as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    result = RunResult.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise RegistryCorrupt(self.path, line_no, str(exc)) from exc
                self._remember(result)

    def _remember(self, result: RunResult) -> None:
        if result.run_id in self._records:
            prior = self._records[result.run_id]
            if prior.ok and result.ok:
                raise RegistryCorrupt(
                    self.path or "<memory>", len(self._order) + 1,
                    f"duplicate completed record for run {result.run_id}",
                )
        else:
            self._order.append(result.run_id)
        self._records[result.run_id] = result

    def append(self, result: RunResult) -> None:
        with self._lock:
            self._remember(result)
            if self.path is not None:
                with self.path.open("a") as fh:
                    fh.write(json.dumps(result.as_dict(), sort_keys=True) + "\n")
                    fh.flush()

    def get(self, run_id: str) -> RunResult | None:
        return self._records.get(run_id)

    @property
    def results(self) -> list[RunResult]:
        return [self._records[rid] for rid in self._order]

    def completed(self) -> list[RunResult]:
        return [r for r in self.results if r.ok]

    def failed(self) -> list[RunResult]:
        return [r for r in self.results if not r.ok]

    def completed_ids(self) -> set[str]:
        return {r.run_id for r in self.results if r.ok}

    def __len__(self) -> int:
        return len(self._records)


def schedule(
    conditions: list[ExperimentCondition],
    k_folds: int = 5,
    registry: RunRegistry | None = None,
    seed: int = 0,
    max_epochs: int = 50,
    patience: int = 5,
) -> list[RunSpec]:
    """Pending (condition x fold) runs, skipping those already completed.

    Failed runs are rescheduled; order is conditions order with folds inner.
    """
    done = registry.completed_ids() if registry is not None else set()
    pending = []
    for condition in conditions:
        for fold in range(k_folds):
            spec = RunSpec.create(condition, fold, seed, max_epochs, patience)
            if spec.run_id not in done:
                pending.append(spec)
    return pending
