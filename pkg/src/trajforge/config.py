"""Pipeline configuration loaded from a single JSON document.

String values may reference environment variables as ``${NAME}``; API keys
are never written inline, backends name the variable holding them through
``api_key_env``. Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any

from .backends import BackendConfig
from .errors import ConfigError
from .evalkit import DEFAULT_PRICE_PER_TOKEN

ROLES = ("policy", "verbalizer", "proposer", "simulator", "scorer", "judge")

_ENV_REF = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def interpolate(value: Any, path: str = "") -> Any:
    if isinstance(value, str):
        def sub(m):
            name = m.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name} is not set", path or None)
            return os.environ[name]

        return _ENV_REF.sub(sub, value)
    if isinstance(value, dict):
        return {k: interpolate(v, f"{path}.{k}" if path else k) for k, v in value.items()}
    if isinstance(value, list):
        return [interpolate(v, f"{path}[{i}]") for i, v in enumerate(value)]
    return value


@dataclass(frozen=True)
class PipelineConfig:
    sites_dir: Path
    queries: Path
    output_dir: Path
    backends: dict[str, BackendConfig]
    clip_k: int = 3
    max_steps: int = 15
    branch_k: int = 3
    sim_depth: int = 2
    rollback_n: int = 2
    rollback_mode: str = "continue"
    seed: int = 42
    judge: str = "model_based"
    price_per_token: Decimal = DEFAULT_PRICE_PER_TOKEN
    base_dir: Path = field(default_factory=Path.cwd)


_INT_FIELDS = ("clip_k", "max_steps", "branch_k", "sim_depth", "rollback_n")


def config_from_dict(raw: dict, base_dir: Path) -> PipelineConfig:
    raw = interpolate(raw)

    def path_field(name: str, must_exist: bool = True) -> Path:
        if name not in raw:
            raise ConfigError("required field is missing", name)
        p = Path(raw[name])
        p = p if p.is_absolute() else base_dir / p
        if must_exist and not p.exists():
            raise ConfigError(f"path {p} does not exist", name)
        return p

    ints = {}
    for name in _INT_FIELDS:
        if name in raw:
            v = raw[name]
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError("must be a positive integer", name)
            ints[name] = v
    seed = raw.get("seed", 42)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("must be an integer", "seed")
    mode = raw.get("rollback_mode", "continue")
    if mode not in ("continue", "truncate"):
        raise ConfigError("must be 'continue' or 'truncate'", "rollback_mode")
    judge = raw.get("judge", "model_based")
    if judge not in ("rule_based", "model_based"):
        raise ConfigError("must be 'rule_based' or 'model_based'", "judge")
    try:
        price = Decimal(str(raw.get("price_per_token", DEFAULT_PRICE_PER_TOKEN)))
    except InvalidOperation:
        raise ConfigError("must be a decimal number", "price_per_token") from None

    backends_raw = raw.get("backends")
    if not isinstance(backends_raw, dict):
        raise ConfigError("must map roles to backend configs", "backends")
    unknown = set(backends_raw) - set(ROLES)
    if unknown:
        raise ConfigError(f"unknown roles {sorted(unknown)}", "backends")
    backends = {}
    for role in ROLES:
        if role not in backends_raw:
            raise ConfigError(f"no backend configured for role '{role}'", f"backends.{role}")
        spec = dict(backends_raw[role])
        try:
            cfg = BackendConfig(**spec)
        except ConfigError as exc:
            raise ConfigError(str(exc), f"backends.{role}") from None
        except TypeError as exc:
            raise ConfigError(str(exc), f"backends.{role}") from None
        if cfg.kind == "scripted":
            script = Path(cfg.script)
            script = script if script.is_absolute() else base_dir / script
            if not script.exists():
                raise ConfigError(f"script {script} does not exist", f"backends.{role}.script")
        backends[role] = cfg

    return PipelineConfig(
        sites_dir=path_field("sites_dir"),
        queries=path_field("queries"),
        output_dir=path_field("output_dir", must_exist=False),
        backends=backends,
        seed=seed,
        rollback_mode=mode,
        judge=judge,
        price_per_token=price,
        base_dir=base_dir,
        **ints,
    )


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(raw, path.resolve().parent)
