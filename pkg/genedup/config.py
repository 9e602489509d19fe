"""
Experiment configuration loading for genedup.

This module merges the three sources of a run's settings into one
validated `ExperimentConfig`: per-command defaults, an optional JSON
document (a plain config or a previously written manifest) and explicit
command-line flags, in increasing priority. Validation failures are
re-raised as `ConfigError` naming the offending fields.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pydantic import ValidationError

from .errors import ConfigError
from .schemas import COMMANDS, ExperimentConfig

logger = logging.getLogger(__name__)

# Fixed per-command seeds so bare invocations reproduce.
DEFAULT_SEEDS = {name: 20250 + i for i, name in enumerate(COMMANDS)}

_COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "sde": {"dt": 1e-5, "horizon": 0.1},
    "theorem1": {"n_list": [1000, 10000, 100000], "start": [0.5, 0.5]},
    "psub-scan": {"model": "subfunc", "b": 0.01, "n_list": [25, 50, 100, 200], "reps": 2000},
    "linearize": {"model": "subfunc"},
}


def command_defaults(command: str) -> Dict[str, Any]:
    """Defaults applied before any file or flag."""
    defaults = {"command": command, "seed": DEFAULT_SEEDS.get(command, 0)}
    defaults.update(_COMMAND_DEFAULTS.get(command, {}))
    return defaults


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a JSON config, unwrapping the ``config`` key of a manifest.

    Raises:
        ConfigError: If the file is missing, not JSON or not an object.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    if "config" in data and "outputs" in data:
        logger.info("using the configuration recorded in manifest %s", path)
        data = data["config"]
    return dict(data)


def resolve_config(
    command: str,
    file_values: Optional[Mapping[str, Any]] = None,
    flags: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """Merge defaults < file < flags and validate.

    Flags whose value is None were not given and do not override.

    Raises:
        ConfigError: On validation failure, or when the file names another
            command.
    """
    merged = command_defaults(command)
    if file_values:
        recorded = file_values.get("command", command)
        if recorded != command:
            raise ConfigError(f"config was written for '{recorded}', not '{command}'", ["command"])
        merged.update(file_values)
    merged.update({k: v for k, v in (flags or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except ValidationError as exc:
        fields = sorted({".".join(str(p) for p in err["loc"]) or "config" for err in exc.errors()})
        details = "; ".join(f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid configuration: {details}", fields) from exc
