"""Tool configuration: one JSON file, every flag has a twin key, flags win.

Resolution order: built-in defaults, then the config file (from --config
or the VOCALIS_CONFIG environment variable), then explicit CLI flags.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .stats import DEFAULT_BOOTSTRAP_SEED

CONFIG_ENV_VAR = "VOCALIS_CONFIG"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ToolConfig:
    grid_ms: float = 200.0
    window_ms: float = 200.0
    seed: int = DEFAULT_BOOTSTRAP_SEED
    tick_hz: float = 30.0
    host: str = "127.0.0.1"
    port: int = 8765
    reference_dir: str = "references"
    replay_speed: float = 1.0

    def __post_init__(self):
        if self.grid_ms <= 0 or self.window_ms <= 0 or self.tick_hz <= 0:
            raise ConfigError("grid_ms, window_ms and tick_hz must be positive")
        if not 0 < self.port < 65536:
            raise ConfigError(f"port {self.port} out of range")
        if self.replay_speed < 0:
            raise ConfigError("replay_speed must be >= 0 (0 means unpaced)")


_FIELD_TYPES = {f.name: f.type for f in fields(ToolConfig)}
_CASTS = {"grid_ms": float, "window_ms": float, "seed": int, "tick_hz": float,
          "host": str, "port": int, "reference_dir": str, "replay_speed": float}


def load_config(path: str | os.PathLike | None = None, env: dict | None = None) -> ToolConfig:
    """Config from an explicit path, else $VOCALIS_CONFIG, else defaults."""
    if env is None:
        env = os.environ
    if path is None:
        path = env.get(CONFIG_ENV_VAR)
    if path is None:
        return ToolConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = sorted(set(obj) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(
            f"{path}: unknown config keys {unknown}; allowed: {sorted(_FIELD_TYPES)}"
        )
    kwargs = {}
    for key, value in obj.items():
        try:
            kwargs[key] = _CASTS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {value!r}") from exc
    return ToolConfig(**kwargs)


def apply_overrides(config: ToolConfig, **overrides) -> ToolConfig:
    """Overlay non-None values (CLI flags) onto a loaded config."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **changes) if changes else config
