"""Factorial design expansion and run identity."""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass

from .errors import EmptyFactor

FAMILIES = ("EfficientNet", "ResNet", "VGG")
LS_LEVELS = ("long", "short")

# (family, depth class) -> concrete network name used on the wire.
MODEL_NAMES = {
    ("EfficientNet", "long"): "B5",
    ("EfficientNet", "short"): "B0",
    ("ResNet", "long"): "R50",
    ("ResNet", "short"): "R18",
    ("VGG", "long"): "V19",
    ("VGG", "short"): "V16",
}
MODEL_TO_FACTORS = {name: factors for factors, name in MODEL_NAMES.items()}

DEFAULT_DATASET_SIZES = (200, 500, 1000, 2500, 5000, 10000)
DEFAULT_LEARNING_RATES = (1e-2, 1e-3, 1e-4)
DEFAULT_REGULARIZATIONS = (1e-2, 1e-4, 1e-6)
DEFAULT_MAX_EPOCHS = 50
DEFAULT_PATIENCE = 5


@dataclass(frozen=True, slots=True)
class ExperimentCondition:
    """One cell of the factorial design."""

    family: str
    ls: str
    dataset_size: int
    lr: float
    reg: float

    @property
    def model_name(self) -> str:
        return MODEL_NAMES[(self.family, self.ls)]

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "ls": self.ls,
            "dataset_size": self.dataset_size,
            "lr": self.lr,
            "reg": self.reg,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentCondition":
        return cls(
            family=data["family"],
            ls=data["ls"],
            dataset_size=int(data["dataset_size"]),
            lr=float(data["lr"]),
            reg=float(data["reg"]),
        )


@dataclass(frozen=True)
class FactorGrid:
    """Factor levels of the study; defaults reproduce the 324-condition design."""

    families: tuple[str, ...] = FAMILIES
    ls_levels: tuple[str, ...] = LS_LEVELS
    dataset_sizes: tuple[int, ...] = DEFAULT_DATASET_SIZES
    learning_rates: tuple[float, ...] = DEFAULT_LEARNING_RATES
    regularizations: tuple[float, ...] = DEFAULT_REGULARIZATIONS

    def as_dict(self) -> dict:
        return {
            "families": list(self.families),
            "ls_levels": list(self.ls_levels),
            "dataset_sizes": list(self.dataset_sizes),
            "learning_rates": list(self.learning_rates),
            "regularizations": list(self.regularizations),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FactorGrid":
        kwargs = {}
        for name in ("families", "ls_levels"):
            if name in data:
                kwargs[name] = tuple(str(v) for v in data[name])
        if "dataset_sizes" in data:
            kwargs["dataset_sizes"] = tuple(int(v) for v in data["dataset_sizes"])
        for name in ("learning_rates", "regularizations"):
            if name in data:
                kwargs[name] = tuple(float(v) for v in data[name])
        return cls(**kwargs)


def expand_grid(grid: FactorGrid) -> list[ExperimentCondition]:
    """Full Cartesian product of the factor levels, in declared order."""
    for name in ("families", "ls_levels", "dataset_sizes", "learning_rates", "regularizations"):
        if not getattr(grid, name):
            raise EmptyFactor(f"factor {name} has no levels")
    for family, ls in itertools.product(grid.families, grid.ls_levels):
        if (family, ls) not in MODEL_NAMES:
            raise EmptyFactor(f"no concrete model for family={family!r}, ls={ls!r}")
    return [
        ExperimentCondition(family, ls, size, lr, reg)
        for family in grid.families
        for ls in grid.ls_levels
        for size in grid.dataset_sizes
        for lr in grid.learning_rates
        for reg in grid.regularizations
    ]


def make_run_id(condition: ExperimentCondition, fold: int, seed: int) -> str:
    """Deterministic, platform-independent run identifier."""
    payload = json.dumps(
        {"condition": condition.as_dict(), "fold": fold, "seed": seed},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True, slots=True)
class RunSpec:
    """One scheduled training/evaluation run."""

    run_id: str
    condition: ExperimentCondition
    fold: int
    seed: int
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: int = DEFAULT_PATIENCE

    @classmethod
    def create(
        cls,
        condition: ExperimentCondition,
        fold: int,
        seed: int,
        max_epochs: int = DEFAULT_MAX_EPOCHS,
        patience: int = DEFAULT_PATIENCE,
    ) -> "RunSpec":
        return cls(
            run_id=make_run_id(condition, fold, seed),
            condition=condition,
            fold=fold,
            seed=seed,
            max_epochs=max_epochs,
            patience=patience,
        )
