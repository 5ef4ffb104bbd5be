"""Study configuration: a JSON file validated against a published schema."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .grid import DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE, FactorGrid

TRAINER_ENV_VAR = "CAPAX_TRAINER"

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "manifest": {"type": "string"},
        "registry": {"type": "string"},
        "trainer": {
            "oneOf": [
                {"type": "string", "minLength": 1},
                {"type": "array", "items": {"type": "string"}, "minItems": 1},
            ]
        },
        "parallelism": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "k_folds": {"type": "integer", "minimum": 2},
        "max_epochs": {"type": "integer", "minimum": 1},
        "patience": {"type": "integer", "minimum": 1},
        "epoch_timeout": {"type": "number", "exclusiveMinimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "families": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "ls_levels": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "dataset_sizes": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "learning_rates": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "regularizations": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
        },
        "plan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sizes": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "images_per_patient": {"type": "integer", "minimum": 1},
                "dev_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "fold_mode": {"enum": ["auto", "grouped", "imagewise"]},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "response": {"enum": ["dice", "bce"]},
                "confidence": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
    },
}


@dataclass(frozen=True)
class StudyConfig:
    """Everything a study needs: paths, factor grids, trainer command, options."""

    manifest: str = "plan.json"
    registry: str = "registry.jsonl"
    trainer: str | list[str] = field(
        default_factory=lambda: ["capax-synthetic-trainer"]
    )
    parallelism: int = 1
    seed: int = 0
    k_folds: int = 5
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: int = DEFAULT_PATIENCE
    epoch_timeout: float = 120.0
    grid: FactorGrid = FactorGrid()
    plan_sizes: tuple[int, ...] | None = None
    plan_images_per_patient: int = 100
    plan_dev_fraction: float = 0.8
    plan_fold_mode: str = "auto"
    response: str = "dice"
    confidence: float = 0.95


def load_config(path: str | Path) -> StudyConfig:
    """Read and validate a study configuration file.

    The CAPAX_TRAINER environment variable, when set, overrides the trainer
    command from the file.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data)


def parse_config(data: dict) -> StudyConfig:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid study config: {exc.message}") from exc

    kwargs = {}
    for name in ("manifest", "registry", "trainer", "parallelism", "seed", "k_folds",
                 "max_epochs", "patience", "epoch_timeout"):
        if name in data:
            kwargs[name] = data[name]
    if "grid" in data:
        kwargs["grid"] = FactorGrid.from_dict(data["grid"])
    plan = data.get("plan", {})
    if "sizes" in plan:
        kwargs["plan_sizes"] = tuple(plan["sizes"])
    if "images_per_patient" in plan:
        kwargs["plan_images_per_patient"] = plan["images_per_patient"]
    if "dev_fraction" in plan:
        kwargs["plan_dev_fraction"] = plan["dev_fraction"]
    if "fold_mode" in plan:
        kwargs["plan_fold_mode"] = plan["fold_mode"]
    analysis = data.get("analysis", {})
    if "response" in analysis:
        kwargs["response"] = analysis["response"]
    if "confidence" in analysis:
        kwargs["confidence"] = analysis["confidence"]

    config = StudyConfig(**kwargs)
    env_trainer = os.environ.get(TRAINER_ENV_VAR)
    if env_trainer:
        config = StudyConfig(**{**config.__dict__, "trainer": env_trainer})
    return config
