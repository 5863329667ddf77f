"""Resolved pipeline configuration: JSON schema, defaults and (de)serialization.

Numeric hyperparameters come only from the config file — environment
variables may override paths, never numbers — and every run directory
receives the exact resolved config so reruns reproduce results bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .aco import AcoConfig
from .errors import DataError
from .pipeline import PipelineConfig
from .training import TrainConfig

__all__ = [
    "CONFIG_SCHEMA",
    "default_config",
    "load_config",
    "save_config",
    "config_to_dict",
    "config_from_dict",
]

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "folds": {"type": "integer", "minimum": 2},
        "feature_sparsity": {
            "oneOf": [
                {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                },
            ]
        },
        "patient_threshold": {"type": "number", "minimum": 0},
        "aco": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": {"type": "integer", "minimum": 1},
                "agents_per_omic": {"type": "integer", "minimum": 1},
                "node_init": {"type": "number", "exclusiveMinimum": 0},
                "edge_init": {"type": "number", "exclusiveMinimum": 0},
                "node_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "edge_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "omic_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "q0": {"type": "number", "minimum": 0, "maximum": 1},
                "budget_per_agent": {"type": "integer", "minimum": 1},
                "select_per_omic": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "training": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pretrain_epochs": {"type": "integer", "minimum": 0},
                "train_epochs": {"type": "integer", "minimum": 0},
                "pretrain_lr": {"type": "number", "exclusiveMinimum": 0},
                "train_lr": {"type": "number", "exclusiveMinimum": 0},
                "vcdn_lr": {"type": "number", "exclusiveMinimum": 0},
                "hidden_dims": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
                "heads": {"type": "integer", "minimum": 1},
                "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "leaky_slope": {"type": "number", "minimum": 0},
                "lr_step": {"type": "integer", "minimum": 1},
                "lr_factor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "evaluation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "positive_class": {"type": "integer", "minimum": 0},
                "threshold": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
    },
}


def default_config():
    """Pipeline defaults mirroring the published common hyperparameters."""
    return PipelineConfig()


def config_to_dict(cfg):
    return cfg.to_dict()


def config_from_dict(obj):
    """Validate against the schema and build the resolved config."""
    try:
        jsonschema.validate(obj, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise DataError(f"config schema violation: {exc.message}")
    cfg = PipelineConfig(
        seed=obj.get("seed", 0),
        folds=obj.get("folds", 10),
        feature_sparsity=obj.get("feature_sparsity", 0.9),
        patient_threshold=obj.get("patient_threshold", 0.5),
        aco=AcoConfig(**obj.get("aco", {})),
        training=TrainConfig(
            **{
                **obj.get("training", {}),
                "hidden_dims": tuple(
                    obj.get("training", {}).get("hidden_dims", (100, 100, 50))
                ),
            }
        ),
        positive_class=obj.get("evaluation", {}).get("positive_class", 0),
        threshold=obj.get("evaluation", {}).get("threshold", 0.5),
    )
    cfg.aco.validate()
    return cfg


def load_config(path):
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})")
    return config_from_dict(obj)


def save_config(cfg, path):
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True))
