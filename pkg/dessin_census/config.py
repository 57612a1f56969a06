"""Configuration helpers for the dessin census."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

from dotenv import dotenv_values, load_dotenv

MODES = ("torsion-free", "all")
OUTPUT_FORMATS = ("human", "csv", "jsonl")

_ENV_KEYS = {
    "store_path": "DESSIN_CENSUS_STORE",
    "max_genus": "DESSIN_CENSUS_MAX_GENUS",
    "workers": "DESSIN_CENSUS_WORKERS",
    "budget_nodes": "DESSIN_CENSUS_BUDGET_NODES",
    "budget_seconds": "DESSIN_CENSUS_BUDGET_SECONDS",
    "mode": "DESSIN_CENSUS_MODE",
    "output_format": "DESSIN_CENSUS_FORMAT",
    "extension_slack": "DESSIN_CENSUS_EXTENSION_SLACK",
    "extension_retries": "DESSIN_CENSUS_EXTENSION_RETRIES",
    "diagnostics_max_index": "DESSIN_CENSUS_DIAGNOSTICS_MAX_INDEX",
    "api_key": "DESSIN_CENSUS_API_KEY",
}

_DEFAULTS: Dict[str, Any] = {
    "store_path": "census",
    "max_genus": 5,
    "workers": 1,
    "budget_nodes": None,
    "budget_seconds": None,
    "mode": "torsion-free",
    "output_format": "human",
    "extension_slack": 1.25,
    "extension_retries": 2,
    "diagnostics_max_index": 64,
    "api_key": None,
}


class ConfigError(RuntimeError):
    """Raised when a configuration value is missing or invalid."""

    def __init__(self, key: str, reason: str) -> None:
        super().__init__(f"{key}: {reason}")
        self.key = key


@dataclass(slots=True)
class Settings:
    """Runtime configuration resolved from flags, a config file, the environment and defaults."""

    store_path: Path
    max_genus: int = 5
    workers: int = 1
    budget_nodes: Optional[int] = None
    budget_seconds: Optional[float] = None
    mode: str = "torsion-free"
    output_format: str = "human"
    extension_slack: float = 1.25
    extension_retries: int = 2
    diagnostics_max_index: int = 64
    api_key: Optional[str] = None


def _optional(cast: Callable[[str], Any]) -> Callable[[Any], Any]:
    def convert(value: Any) -> Any:
        if value is None or value == "":
            return None
        return cast(value)

    return convert


_CASTS: Dict[str, Callable[[Any], Any]] = {
    "store_path": lambda value: Path(str(value)).expanduser(),
    "max_genus": int,
    "workers": int,
    "budget_nodes": _optional(int),
    "budget_seconds": _optional(float),
    "mode": str,
    "output_format": str,
    "extension_slack": float,
    "extension_retries": int,
    "diagnostics_max_index": int,
    "api_key": _optional(str),
}


def _validate(settings: Settings) -> None:
    if settings.max_genus < 2:
        raise ConfigError("max_genus", "must be at least 2")
    if settings.workers < 1:
        raise ConfigError("workers", "must be at least 1")
    if settings.mode not in MODES:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
    if settings.output_format not in OUTPUT_FORMATS:
        raise ConfigError("output_format", f"must be one of {', '.join(OUTPUT_FORMATS)}")
    if settings.budget_nodes is not None and settings.budget_nodes < 1:
        raise ConfigError("budget_nodes", "must be positive")
    if settings.budget_seconds is not None and settings.budget_seconds <= 0:
        raise ConfigError("budget_seconds", "must be positive")
    if settings.extension_slack < 1:
        raise ConfigError("extension_slack", "must be at least 1")
    if settings.extension_retries < 0:
        raise ConfigError("extension_retries", "must not be negative")
    if settings.diagnostics_max_index < 1:
        raise ConfigError("diagnostics_max_index", "must be positive")


def load_settings(config_file: str | Path | None = None, **overrides: Any) -> Settings:
    """Resolve settings with precedence overrides > config file > environment > defaults.

    ``overrides`` whose value is None are ignored so CLI options can be passed through unchanged.
    The config file uses dotenv syntax with the same ``DESSIN_CENSUS_*`` keys as the environment.
    """

    load_dotenv()
    file_values: Mapping[str, Optional[str]] = {}
    if config_file:
        path = Path(config_file).expanduser()
        if not path.is_file():
            raise ConfigError("config_file", f"{path} does not exist")
        file_values = dotenv_values(path)

    resolved: Dict[str, Any] = {}
    for key, env_name in _ENV_KEYS.items():
        if overrides.get(key) is not None:
            raw = overrides[key]
        elif file_values.get(env_name) not in (None, ""):
            raw = file_values[env_name]
        elif os.getenv(env_name):
            raw = os.getenv(env_name)
        else:
            raw = _DEFAULTS[key]
        try:
            resolved[key] = _CASTS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"invalid value {raw!r}") from exc

    unknown = set(overrides) - set(_ENV_KEYS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown setting")

    settings = Settings(**resolved)
    _validate(settings)
    return settings


__all__ = ["ConfigError", "MODES", "OUTPUT_FORMATS", "Settings", "load_settings"]
