"""Run configuration: JSON file + dotted-key overrides on top of defaults,
with unknown keys rejected and a resolved snapshot written next to outputs
so every run can be reproduced from the snapshot alone."""

from __future__ import annotations

import copy
import json
import zlib
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "seed": 0,
    "preset": "dubins-desk",
    "gen_data": {
        "n_base_maps": 30,
        "augment": True,
        "n_obstacles": 10,
        "radius_range": [0.5, 0.5],
        "center_clearance": 0.3,
        "workers": 1,
    },
    "train": {
        "dataset": "dataset.dset",
        "variant": "orn",
        "epochs": 100,
        "batch_size": 16,
        "lr": 1e-4,
        "lr_drop_epochs": [85, 95],
        "lr_drop_factor": 0.1,
        "rwmse_beta": 9.0,
        "rwmse_sigma": 0.25,
        "holdout_fraction": 0.2,
    },
    "eval": {
        "methods": ["oracle"],
        "domains": ["in"],
        "n_episodes": 50,
        "model_path": None,
        "safe_start": False,
        "timeout": 60.0,
        "workers": 1,
        "debug_checks": False,
        "n_obstacles": 10,
    },
    "teleop": {
        "host": "127.0.0.1",
        "port": 8723,
        "method": "oracle",
        "model_path": None,
        "env_kind": "forest",
        "env_seed": 0,
        "time_scale": 1.0,
        "stream_hz": 30.0,
    },
}


def _merge_checked(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}' must be a table")
            out[key] = _merge_checked(base[key], val, where)
        else:
            out[key] = val
    return out


def _apply_override(cfg: dict, dotted: str) -> None:
    if "=" not in dotted:
        raise ConfigError(f"override '{dotted}' must look like key.path=value")
    key_path, raw = dotted.split("=", 1)
    keys = key_path.strip().split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown config key '{key_path}'")
        node = node[k]
    leaf = keys[-1]
    if leaf not in node:
        raise ConfigError(f"unknown config key '{key_path}'")
    try:
        node[leaf] = json.loads(raw)
    except json.JSONDecodeError:
        node[leaf] = raw  # bare strings are fine


def load_config(path: str | None, overrides: list[str] | None = None,
                preset: str | None = None, seed: int | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file '{path}' not found") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file '{path}' is not valid JSON: {e}") from None
        cfg = _merge_checked(cfg, user)
    for dotted in overrides or []:
        _apply_override(cfg, dotted)
    if preset is not None:
        cfg["preset"] = preset
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def write_snapshot(cfg: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    snap = out_dir / "config.resolved.json"
    snap.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return snap


def substream(root_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Labeled child RNG stream: reproducible across subcommands."""
    return np.random.default_rng(
        np.random.SeedSequence([root_seed, zlib.crc32(label.encode()), index]))


def substream_seed(root_seed: int, label: str, index: int = 0) -> int:
    return int(np.random.SeedSequence(
        [root_seed, zlib.crc32(label.encode()), index]).generate_state(1)[0])
