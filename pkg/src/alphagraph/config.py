"""Run configuration and reproducibility manifests.

Configuration is a JSON file of nested sections (see ``DEFAULTS``). Values
merge with precedence defaults < file < environment < command-line, where
environment overrides use the prefix ``ALPHAGRAPH_<SECTION>_<KEY>`` and
command-line overrides arrive as repeated ``--set section.key=value`` flags.
Unknown sections or keys are rejected.

Every command writes a manifest JSON recording the effective configuration,
the seed, and SHA-256 hashes of input and output files (keyed by basename,
so manifests from different working directories compare equal). All
randomness in a run flows from the single manifest seed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

from .errors import ConfigError

ENV_PREFIX = "ALPHAGRAPH_"

DEFAULTS = {
    "paths": {
        "bars": None,
        "news": None,
    },
    "universe": {
        "min_median_dollar_volume": 1e6,
        "min_price": 1.0,
        "min_history": 250,
    },
    "factors": {},  # optional registry override: family -> window list
    "word2vec": {
        "dim": 400,
        "window": 5,
        "negatives": 5,
        "epochs": 5,
        "lr": 0.025,
        "min_count": 10,
    },
    "glove": {
        "dim": 32,
        "x_max": 100.0,
        "alpha": 0.75,
        "epochs": 200,
        "lr": 0.05,
    },
    "graph": {
        "k": 5,
    },
    "model": {
        "lookback": 5,
        "tech_dim": 200,
        "hidden": 32,
        "attn_hidden": 16,
        "temporal_hidden": 16,
        "horizon": 5,
        "epochs": 30,
        "lr": 1e-3,
        "batch_size": 256,
        "val_fraction": 0.2,
        "patience": 10,
        "nonneg_tech": False,
    },
    "split": {
        "train_end": None,
        "gap_days": 10,
    },
    "simulator": {
        "horizon": 5,
        "risk_aversion": 0.5,
        "cov_window": 60,
        "halflife": 20.0,
        "shrinkage": 0.1,
        "per_name_cap": 0.05,
        "gross_cap": 1.0,
        "cost_linear": 5e-4,
        "cost_quadratic": 0.0,
        "hedge": True,
        "initial_capital": 5e7,
    },
    "synth": {
        "n_stocks": 50,
        "days": 750,
        "n_clusters": 5,
        "b_volume": 0.004,
        "b_reversal": 0.10,
        "phi": 0.7,
        "factor_innovation": 0.5,
        "cluster_vol": 0.004,
        "noise_std": 0.012,
        "news_rate": 6.0,
        "co_mention_fidelity": 0.9,
        "tone_fidelity": 0.8,
        "horizon": 5,
        "start": "2015-01-05",
    },
    "interpret": {
        "k_emb": 50,
        "distance_band": 1.0,
        "error_tail": 0.05,
    },
    "seed": 0,
}


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _merge(base: dict, override: dict, path: str = "") -> None:
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "factors":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a section")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value


def load_config(path=None, env=None, overrides=None) -> dict:
    """Resolve the effective configuration from all sources."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        _merge(cfg, file_cfg)
    env = os.environ if env is None else env
    for name, raw in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        tail = name[len(ENV_PREFIX):].lower()
        if tail in ("numba",):  # acceleration flag, not a config key
            continue
        parts = tail.split("_", 1)
        if len(parts) == 1:
            _merge(cfg, {parts[0]: _coerce(raw)})
        else:
            section, key = parts
            if section not in cfg or not isinstance(cfg[section], dict):
                raise ConfigError(f"environment override {name}: unknown section {section!r}")
            _merge(cfg, {section: {key: _coerce(raw)}})
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        node: dict = {}
        leaf = node
        for key in keys[:-1]:
            leaf[key] = {}
            leaf = leaf[key]
        leaf[keys[-1]] = _coerce(raw)
        _merge(cfg, node)
    return cfg


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _portable(cfg: dict) -> dict:
    """Effective config with file paths reduced to basenames."""
    out = copy.deepcopy(cfg)
    for key, value in out.get("paths", {}).items():
        if isinstance(value, str):
            out["paths"][key] = os.path.basename(value)
    return out


def write_manifest(outdir, command: str, cfg: dict, inputs, outputs,
                   extra: dict | None = None) -> Path:
    """Write ``<command>_manifest.json`` and return its path.

    ``inputs``/``outputs`` are iterables of file paths; hashes are keyed by
    basename so the manifest is location-independent and its own hash is a
    determinism check.
    """
    manifest = {
        "command": command,
        "seed": cfg.get("seed"),
        "config": _portable(cfg),
        "inputs": {os.path.basename(str(p)): sha256_file(p) for p in inputs},
        "outputs": {os.path.basename(str(p)): sha256_file(p) for p in outputs},
    }
    if extra:
        manifest["extra"] = extra
    path = Path(outdir) / f"{command.replace('-', '_')}_manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def manifest_hash(path) -> str:
    return sha256_file(path)
