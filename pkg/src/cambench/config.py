"""Run configuration: JSON tree, schema validation, canonical hashing.

The resolved config's sha256 (over canonical JSON) is embedded in every
textual output so byte-identical reruns are verifiable.
"""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import CambenchError

SCHEMA_VERSION = 1

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "workers": 1,
    "epsilon": 1e-6,
    "out_dir": "out",
    "synth": {
        "n": 100,
        "canvas": [224, 224],
        "versions": [1, 2, 3, 4],
        "ecc_levels": ["L", "M", "Q", "H"],
        "module_px": [3, 4, 5, 6],
        "mask_pattern": None,
        "positive_ratio": 0.5,
        "backgrounds": ["flat", "gradient", "blocks"],
        "negative_kinds": ["checkerboard", "block-noise", "grating"],
        "payload_len": [4, 16],
        "distort": [],
        "split": [0.7, 0.15, 0.15],
    },
    "eval": {
        "manifest": "",
        "saliency_dir": "",
        "methods": [],
        "regime_tag": "",
        "k_quantiles": 32,
        "penalty_lambda": 0.25,
        "penalty_alpha": 0.25,
    },
    "robustness": {
        "manifest": "",
        "saliency_root": "",
        "methods": [],
        "families": ["rotation", "perspective", "blur", "jpeg",
                     "lowlight", "occlusion"],
        "severities": [1, 2, 3, 4, 5],
        "k_quantiles": 32,
    },
    "causal": {
        "manifest": "",
        "saliency_dir": "",
        "method": "",
        "scorer": "builtin",
        "scorer_command": [],
        "occlusion_fill": 0.5,
        "id_steps": 20,
    },
}


def _schema() -> dict:
    text = resources.files("cambench").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_override(text: str):
    if "=" not in text:
        raise CambenchError(f"override {text!r} must look like dotted.key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings are convenient on the CLI
    return key.strip(), value


def load_config(path: str | None = None, overrides: list[str] | None = None) -> dict:
    """Defaults <- optional JSON file <- key=value overrides, then
    schema-validate."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CambenchError(f"cannot load config {path}: {exc}") from exc
        cfg = _merge(cfg, loaded)
    for text in overrides or []:
        key, value = _parse_override(text)
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, _schema())
    except jsonschema.ValidationError as exc:
        raise CambenchError(f"config invalid at {list(exc.absolute_path)}: "
                            f"{exc.message}") from exc


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True)


# keys that describe where/how a run executes, not what it computes;
# excluded from hashing so reruns in another directory or with another
# worker count stay byte-identical
EXECUTION_KEYS = ("out_dir", "workers")


def semantic_config(cfg: dict) -> dict:
    out = copy.deepcopy(cfg)
    for key in EXECUTION_KEYS:
        out.pop(key, None)
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        canonical_json(semantic_config(cfg)).encode("utf-8")).hexdigest()
