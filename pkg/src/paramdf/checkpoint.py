"""JSON checkpoints of model parameters plus the producing config.

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every parameter bit for bit.
"""
from __future__ import annotations

import json

import numpy as np

from .model import ModelConfig, param_shapes

FORMAT = "paramdf-checkpoint"
VERSION = 1


def checkpoint_to_dict(cfg: ModelConfig, params: dict, extra: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model_config": cfg.to_dict(),
        "params": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()} for k, v in params.items()},
    }
    if extra:
        doc["extra"] = extra
    return doc


def checkpoint_from_dict(doc: dict) -> tuple[ModelConfig, dict]:
    if doc.get("format") != FORMAT:
        raise ValueError("not a paramdf checkpoint")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    cfg = ModelConfig.from_dict(doc["model_config"])
    params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in doc["params"].items()}
    expected = param_shapes(cfg)
    if set(expected) != set(params) or any(tuple(params[k].shape) != tuple(s) for k, s in expected.items()):
        raise ValueError("checkpoint parameters do not match its model config")
    return cfg, params


def save_checkpoint(path, cfg: ModelConfig, params: dict, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_to_dict(cfg, params, extra), fh)


def load_checkpoint(path) -> tuple[ModelConfig, dict]:
    with open(path, encoding="utf-8") as fh:
        return checkpoint_from_dict(json.load(fh))
