"""Synthetic trainer internals: a fitted response surface plus seeded run simulation.

The package ships a reference surface (coefficients of the factorial model
fitted on a prior full-scale study) so end-to-end experiments run without
GPUs or data. Everything here is deterministic given a run id and uses only
the standard library, keeping trainer subprocess startup cheap.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

from .coding import TermCoding, dev_image_count
from .grid import ExperimentCondition, RunSpec
from .registry import EpochReport, RunResult, STATUS_COMPLETED, STATUS_STOPPED_EARLY
from .stopping import stop_epoch

# Reference surface: expected test DICE as a function of the design factors,
# in TermCoding column order (intercept, depth class, nested family
# indicators, dataset covariate, per-cell learning-rate slopes, weight decay).
REFERENCE_COEFFICIENTS = (
    -0.5810,   # Intercept
    0.0016,    # ls[T.short]
    -0.0936,   # ls[long]:Family[T.ResNet]
    -0.1107,   # ls[short]:Family[T.ResNet]
    -0.3903,   # ls[long]:Family[T.VGG]
    -0.3237,   # ls[short]:Family[T.VGG]
    0.1627,    # log(Dataset)
    0.0158,    # log(lr):ls[long]:Family[EfficientNet]
    0.0193,    # log(lr):ls[short]:Family[EfficientNet]
    0.0130,    # log(lr):ls[long]:Family[ResNet]
    0.0111,    # log(lr):ls[short]:Family[ResNet]
    -0.0281,   # log(lr):ls[long]:Family[VGG]
    -0.0193,   # log(lr):ls[short]:Family[VGG]
    -0.0003,   # log(reg)
)

# Residual standard deviation matching the reference fit (ssr 23.7779 on
# 1606 residual degrees of freedom).
REFERENCE_SIGMA = math.sqrt(23.7779 / 1606)

CLAMP_MODES = ("raw", "clamped")


@dataclass(frozen=True)
class ResponseSurface:
    """Linear mapping from experiment factors to expected test DICE.

    In "raw" mode simulated outcomes are not clipped to [0, 1]; clipping
    would bias coefficient recovery. "clamped" mode produces metric-valid
    values instead.
    """

    coefficients: tuple[float, ...] = REFERENCE_COEFFICIENTS
    sigma: float = REFERENCE_SIGMA
    clamp_mode: str = "raw"
    coding: TermCoding = TermCoding()
    dev_fraction: float = 0.8

    def __post_init__(self):
        if len(self.coefficients) != self.coding.width:
            raise ValueError(
                f"{len(self.coefficients)} coefficients for a width-{self.coding.width} coding"
            )
        if self.clamp_mode not in CLAMP_MODES:
            raise ValueError(f"clamp_mode must be one of {CLAMP_MODES}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def mean(self, condition: ExperimentCondition) -> float:
        row = self.coding.encode_row(
            condition.family,
            condition.ls,
            dev_image_count(condition.dataset_size, self.dev_fraction),
            condition.lr,
            condition.reg,
        )
        return sum(x * b for x, b in zip(row, self.coefficients))


def surface_mean(condition: ExperimentCondition, surface: ResponseSurface | None = None) -> float:
    return (surface or ResponseSurface()).mean(condition)


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _run_rng(run_id: str) -> random.Random:
    digest = hashlib.sha256(run_id.encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class SimulatedRun:
    """Full deterministic outcome of one synthetic run, before early stopping."""

    train_loss: tuple[float, ...]
    val_loss: tuple[float, ...]
    val_dice: tuple[float, ...]
    test_loss: float
    test_dice: float


def simulate_outcome(
    condition: ExperimentCondition,
    run_id: str,
    surface: ResponseSurface,
    max_epochs: int = 50,
) -> SimulatedRun:
    """Draw the whole epoch trajectory and held-out metrics for one run.

    All draws happen in a fixed order up front, so the stream is bit-identical
    for a given run id no matter when the harness stops the run.
    """
    rng = _run_rng(run_id)
    mean = surface.mean(condition)

    test_dice = mean + surface.sigma * rng.gauss(0.0, 1.0)
    val_target = mean + surface.sigma * rng.gauss(0.0, 1.0)
    test_loss = max(1e-4, 0.8 * (1.0 - _clamp01(test_dice)) + rng.gauss(0.0, 0.01))
    if surface.clamp_mode == "clamped":
        test_dice = _clamp01(test_dice)

    floor = rng.uniform(0.05, 0.30)
    amplitude = rng.uniform(0.5, 1.5)
    tau = rng.uniform(2.0, 12.0)
    noise_sd = rng.uniform(0.001, 0.02)

    train_loss, val_loss, val_dice = [], [], []
    for epoch in range(1, max_epochs + 1):
        decay = math.exp(-(epoch - 1) / tau)
        val_loss.append(max(1e-4, floor + amplitude * decay + rng.gauss(0.0, noise_sd)))
        train_loss.append(
            max(1e-4, 0.7 * floor + amplitude * math.exp(-(epoch - 1) / (1.2 * tau))
                + rng.gauss(0.0, 0.5 * noise_sd))
        )
        val_dice.append(_clamp01(_clamp01(val_target) * (1.0 - decay) + rng.gauss(0.0, 0.01)))

    return SimulatedRun(
        train_loss=tuple(train_loss),
        val_loss=tuple(val_loss),
        val_dice=tuple(val_dice),
        test_loss=test_loss,
        test_dice=test_dice,
    )


def simulate_run(spec: RunSpec, surface: ResponseSurface | None = None) -> RunResult:
    """Run one spec in process, applying the harness early-stopping policy.

    Produces the same result the wire protocol path yields for the bundled
    synthetic trainer, without spawning a process.
    """
    surface = surface or ResponseSurface()
    sim = simulate_outcome(spec.condition, spec.run_id, surface, spec.max_epochs)
    epochs_run, best = stop_epoch(sim.val_loss, spec.patience, spec.max_epochs)
    reports = tuple(
        EpochReport(e, sim.train_loss[e - 1], sim.val_loss[e - 1], sim.val_dice[e - 1])
        for e in range(1, epochs_run + 1)
    )
    status = STATUS_COMPLETED if epochs_run == spec.max_epochs else STATUS_STOPPED_EARLY
    return RunResult(
        run_id=spec.run_id,
        condition=spec.condition,
        fold=spec.fold,
        seed=spec.seed,
        status=status,
        epochs=reports,
        best_epoch=best,
        val_loss=sim.val_loss[best - 1],
        val_dice=sim.val_dice[best - 1],
        test_loss=sim.test_loss,
        test_dice=sim.test_dice,
    )


def simulate_study(specs, surface: ResponseSurface | None = None) -> list[RunResult]:
    """In-process execution of a full schedule; used for fast end-to-end tests."""
    surface = surface or ResponseSurface()
    return [simulate_run(spec, surface) for spec in specs]
